//! Periodic lattices, unitary transforms, states, packets and norms.
//!
//! Conventions: the continuous transform is `û(ξ) = (2π)^{-n/2} ∫ e^{-ix·ξ} u(x) dx`.
//! A grid covers `[-L, L)^dim` with `N` points per axis, `x_j = -L + jΔx`, and
//! frequencies `ξ_k = kπ/L` for `k ∈ [-N/2, N/2)`. Spectra are stored in natural
//! (increasing) order as states on the dual grid of half-width `ξ_max = πN/(2L)`,
//! so spatial and spectral data share one type and transforming twice gives
//! `u(-x)` exactly.

use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Vec2 = [f64; 2];

/// Largest mass fraction allowed in the outer tenth of the box before a run is
/// flagged for wraparound. Band-limited packets carry slowly decaying tails, so
/// a tighter value trips on the initial data itself.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[inline]
pub fn norm2(v: Vec2) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Counter-clockwise quarter turn. For a unit `ω` in the plane this spans `ω⊥`.
#[inline]
pub fn rot90(v: Vec2) -> Vec2 {
    [-v[1], v[0]]
}

/// `⟨t⟩ = (1 + t²)^{1/2}`.
#[inline]
pub fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// Uniform periodic lattice on `[-L, L)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::config(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::config(format!("points per axis must be a power of two >= 2, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::config(format!("half width must be positive, got {half_width}")));
        }
        Ok(Grid { dim, n, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }
    pub fn freq_spacing(&self) -> f64 {
        PI / self.half_width
    }
    pub fn xi_max(&self) -> f64 {
        PI * self.n as f64 / (2.0 * self.half_width)
    }
    /// Total number of lattice nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// The frequency lattice seen as a spatial grid.
    pub fn dual(&self) -> Grid {
        Grid { dim: self.dim, n: self.n, half_width: self.xi_max() }
    }

    pub fn with_half_width(&self, half_width: f64) -> Result<Grid> {
        Grid::new(self.dim, self.n, half_width)
    }

    /// Same shape and extent up to roundoff.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }

    pub fn axis(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.n).map(|j| -self.half_width + j as f64 * dx).collect()
    }

    /// Frequencies in natural order, `ξ = (m - N/2)·π/L`.
    pub fn freq_axis(&self) -> Vec<f64> {
        let dk = self.freq_spacing();
        let h = (self.n / 2) as f64;
        (0..self.n).map(|m| (m as f64 - h) * dk).collect()
    }

    /// Axis indices of a flat index.
    #[inline]
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Vec2 {
        let dx = self.spacing();
        let [i, j] = self.unflatten(idx);
        let x = -self.half_width + i as f64 * dx;
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, -self.half_width + j as f64 * dx]
        }
    }

    #[inline]
    pub fn freq(&self, idx: usize) -> Vec2 {
        self.dual().point(idx)
    }

    /// Flat index of the node nearest to `x` (periodic wrap).
    pub fn nearest_index(&self, x: Vec2) -> usize {
        let dx = self.spacing();
        let n = self.n as i64;
        let wrap = |c: f64| -> usize {
            let k = ((c + self.half_width) / dx).round() as i64;
            k.rem_euclid(n) as usize
        };
        if self.dim == 1 {
            wrap(x[0])
        } else {
            wrap(x[0]) * self.n + wrap(x[1])
        }
    }

    /// Fails unless `ξ_max ≥ |ρ| + 2`.
    pub fn require_nyquist(&self, rho_norm: f64) -> Result<()> {
        let required = rho_norm + 2.0;
        if self.xi_max() + 1e-12 < required {
            let min_points = (2.0 * self.half_width * required / PI).ceil() as usize;
            return Err(Error::Nyquist {
                required,
                available: self.xi_max(),
                min_points: min_points.next_power_of_two(),
            });
        }
        Ok(())
    }

    /// `(-1)^{i+j}` for the flat index.
    #[inline]
    fn parity(&self, idx: usize) -> f64 {
        let [i, j] = self.unflatten(idx);
        if (i + j) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `(-1)^{k_1 + k_2}` with `k = m - N/2`.
    #[inline]
    fn freq_parity(&self, idx: usize) -> f64 {
        let [i, j] = self.unflatten(idx);
        let h = self.n / 2;
        let s = if self.dim == 1 { i + h } else { i + j + 2 * h };
        if s % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Serializable grid description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

fn default_dim() -> usize {
    2
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.n, self.half_width)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec { dim: g.dim(), n: g.n(), half_width: g.half_width() }
    }
}

/// Mean velocity `ρ = √λ ω` of a high-velocity probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boost {
    pub lambda: f64,
    pub omega: Vec2,
}

impl Boost {
    pub fn new(lambda: f64, omega: Vec2) -> Result<Boost> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::config(format!("lambda must be positive, got {lambda}")));
        }
        if (norm2(omega) - 1.0).abs() > 1e-12 {
            return Err(Error::config("omega must be a unit vector"));
        }
        Ok(Boost { lambda, omega })
    }

    /// Same as [`Boost::new`] but also enforces `λ > 16` (speed above 4).
    pub fn for_probe(lambda: f64, omega: Vec2) -> Result<Boost> {
        if lambda <= 16.0 {
            return Err(Error::config(format!("probe lambda must exceed 16, got {lambda}")));
        }
        Boost::new(lambda, omega)
    }

    pub fn speed(&self) -> f64 {
        self.lambda.sqrt()
    }

    pub fn rho(&self) -> Vec2 {
        let s = self.speed();
        [s * self.omega[0], s * self.omega[1]]
    }
}

/// Complex field on a grid. Immutable: every operation returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    grid: Grid,
    values: Vec<Complex64>,
}

impl State {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<State> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::config("state contains non-finite values"));
        }
        Ok(State { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> State {
        debug_assert_eq!(values.len(), grid.len());
        State { grid, values }
    }

    pub fn zeros(grid: Grid) -> State {
        State { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec2) -> Complex64) -> State {
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        State { grid, values }
    }

    pub fn from_real(grid: Grid, re: &[f64]) -> Result<State> {
        State::new(grid, re.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `(a, b) = Σ a·conj(b)·Δx^dim`.
    pub fn inner(&self, other: &State) -> Result<Complex64> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn map(&self, f: impl Fn(Vec2, Complex64) -> Complex64) -> State {
        let values = self.values.iter().enumerate().map(|(k, &v)| f(self.grid.point(k), v)).collect();
        State { grid: self.grid, values }
    }

    pub fn scale(&self, c: Complex64) -> State {
        State { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn normalized(&self) -> Result<State> {
        let n = self.l2_norm();
        if n == 0.0 {
            return Err(Error::config("cannot normalize the zero state"));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn add(&self, other: &State) -> Result<State> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &State) -> Result<State> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &State, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<State> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(State { grid: self.grid, values })
    }

    /// Pointwise product with a real field.
    pub fn mul_real(&self, field: &[f64]) -> Result<State> {
        if field.len() != self.values.len() {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(field).map(|(v, &w)| v * w).collect();
        Ok(State { grid: self.grid, values })
    }

    /// Fraction of the squared norm carried by nodes in the outer 10% shell
    /// (`max_i |x_i| > 0.9 L`).
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let cut = 0.9 * self.grid.half_width;
        let shell: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let p = self.grid.point(*k);
                p[0].abs() > cut || (self.grid.dim == 2 && p[1].abs() > cut)
            })
            .map(|(_, v)| v.norm_sqr())
            .sum();
        shell / total
    }

    /// Mass-weighted mean frequency.
    pub fn mean_momentum(&self) -> Vec2 {
        let spec = fft_forward(self);
        let mut m = [0.0, 0.0];
        let mut total = 0.0;
        for (k, v) in spec.values.iter().enumerate() {
            let w = v.norm_sqr();
            let xi = spec.grid.point(k);
            m[0] += w * xi[0];
            m[1] += w * xi[1];
            total += w;
        }
        if total > 0.0 {
            [m[0] / total, m[1] / total]
        } else {
            [0.0, 0.0]
        }
    }
}

/// Samples of `û` on the frequency lattice, returned as a state on the dual grid.
pub fn fft_forward(state: &State) -> State {
    let g = state.grid;
    let mut buf: Vec<Complex64> = state.values.iter().enumerate().map(|(k, v)| v * g.parity(k)).collect();
    fft::dft(&mut buf, g.n, g.dim, FftDirection::Forward);
    let scale = (g.spacing() / (2.0 * PI).sqrt()).powi(g.dim as i32);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= scale * g.freq_parity(k);
    }
    State::from_raw(g.dual(), buf)
}

/// Inverse of [`fft_forward`]: takes a spectrum on the dual grid.
pub fn fft_inverse(spectrum: &State) -> State {
    let target = spectrum.grid.dual();
    let mut buf: Vec<Complex64> = spectrum.values.iter().enumerate().map(|(k, v)| v * target.freq_parity(k)).collect();
    fft::dft(&mut buf, target.n, target.dim, FftDirection::Inverse);
    let scale = (target.freq_spacing() / (2.0 * PI).sqrt()).powi(target.dim as i32);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= scale * target.parity(k);
    }
    State::from_raw(target, buf)
}

/// Builds the state whose spectrum is `f(ξ)` sampled on the frequency lattice.
pub fn from_spectrum(grid: Grid, f: impl Fn(Vec2) -> Complex64) -> State {
    fft_inverse(&State::from_fn(grid.dual(), f))
}

/// Norms available through [`weighted_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "snake_case")]
pub enum NormKind {
    L2,
    /// `‖⟨x⟩^δ u‖_{L²}`
    L2Weighted(f64),
    /// `‖⟨ξ⟩^s û‖_{L²}`
    Sobolev(f64),
    /// `‖⟨ξ⟩^{-1} û‖_{L²}`
    SobolevNeg1,
    /// `‖⟨x⟩^s u‖_{L¹}`
    L1Weighted(f64),
}

pub fn weighted_norm(state: &State, kind: NormKind) -> f64 {
    let weighted_l2 = |s: &State, p: f64| -> f64 {
        let g = s.grid;
        let sum: f64 = s
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let x = g.point(k);
                (1.0 + dot(x, x)).powf(p) * v.norm_sqr()
            })
            .sum();
        (sum * g.cell_volume()).sqrt()
    };
    match kind {
        NormKind::L2 => state.l2_norm(),
        NormKind::L2Weighted(d) => weighted_l2(state, d),
        NormKind::Sobolev(s) => weighted_l2(&fft_forward(state), s),
        NormKind::SobolevNeg1 => weighted_l2(&fft_forward(state), -1.0),
        NormKind::L1Weighted(s) => {
            let g = state.grid;
            let sum: f64 = state
                .values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let x = g.point(k);
                    (1.0 + dot(x, x)).powf(0.5 * s) * v.norm()
                })
                .sum();
            sum * g.cell_volume()
        }
    }
}

/// Packet with `Φ̂(ξ) = b(|ξ - center| / radius)`, normalized in `L²`.
pub fn make_band_limited_packet(grid: Grid, center: Vec2, radius: f64, profile: BumpProfile) -> Result<State> {
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(Error::config(format!("packet support radius must lie in (0, 1], got {radius}")));
    }
    let reach = if grid.dim() == 1 { center[0].abs() + radius } else { norm2(center) + radius };
    if reach >= grid.xi_max() {
        return Err(Error::Nyquist {
            required: reach,
            available: grid.xi_max(),
            min_points: ((2.0 * grid.half_width() * reach / PI).ceil() as usize + 1).next_power_of_two(),
        });
    }
    let dk = grid.freq_spacing();
    if 2.0 * radius / dk < 4.0 {
        return Err(Error::Resolution(format!(
            "packet support of radius {radius} spans fewer than 4 frequency nodes (spacing {dk:.3})"
        )));
    }
    let c = if grid.dim() == 1 { [center[0], 0.0] } else { center };
    from_spectrum(grid, |xi| {
        let d = [xi[0] - c[0], xi[1] - c[1]];
        Complex64::new(profile.eval(norm2(d) / radius), 0.0)
    })
    .normalized()
}

/// Multiplication by `e^{ix·ρ}`. Enforces the Nyquist margin `ξ_max ≥ |ρ| + 2`.
pub fn boost(state: &State, rho: Vec2) -> Result<State> {
    state.grid.require_nyquist(norm2(rho))?;
    Ok(modulate(state, rho))
}

/// Multiplication by `e^{ix·ρ}` without the margin check.
pub(crate) fn modulate(state: &State, rho: Vec2) -> State {
    state.map(|x, v| v * Complex64::from_polar(1.0, dot(x, rho)))
}

/// Translation `u(x) ↦ u(x - a)` as the spectral phase `e^{-ia·ξ}`; exact on the
/// torus for any real displacement of a band-limited state.
pub fn translate(state: &State, a: Vec2) -> State {
    let spec = fft_forward(state);
    let shifted = spec.map(|xi, v| v * Complex64::from_polar(1.0, -dot(a, xi)));
    fft_inverse(&shifted)
}
