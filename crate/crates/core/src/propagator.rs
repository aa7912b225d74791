//! Free and interacting time evolution for `H = -Δ/2 + V`.
//!
//! The interacting propagator is Strang splitting. The same stepper handles a
//! potential translating with constant velocity, `V(x + tρ)`, which is how
//! high-velocity probes are simulated without boosting the state.

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{
    boost, dot, fft_forward, fft_inverse, japanese, modulate, norm2, translate, Boost, Grid, State, Vec2, BOUNDARY_TOL,
};
use crate::potentials::Profile;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Time step control for split-step evolution (splitting order fixed at 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Largest admissible step.
    pub dt: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { dt: 0.01 }
    }
}

impl EvolutionConfig {
    pub fn new(dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        Ok(EvolutionConfig { dt })
    }

    pub fn splitting_order(&self) -> usize {
        2
    }

    pub fn steps_per_unit_time(&self) -> usize {
        (1.0 / self.dt).ceil() as usize
    }

    /// Number of equal steps no longer than `dt` covering a span of length `|t|`.
    pub fn steps_for(&self, t: f64) -> usize {
        ((t.abs() / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Phase-resolution rule `dt ≤ 0.1/(1 + λ)` for packets carrying momentum `√λ`.
    pub fn check_phase_rule(&self, lambda: f64) -> Result<()> {
        let limit = 0.1 / (1.0 + lambda);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "time step {} violates the phase-resolution rule dt <= {limit:.3e} (lambda = {lambda:.3})",
                self.dt
            )));
        }
        Ok(())
    }
}

/// `e^{-itH₀}` as the exact spectral multiplier `e^{-it|ξ|²/2}`.
pub fn free_evolve(state: &State, t: f64) -> State {
    let spec = fft_forward(state);
    let evolved = spec.map(|xi, v| v * Complex64::from_polar(1.0, -0.5 * t * dot(xi, xi)));
    fft_inverse(&evolved)
}

/// Wave number of raw DFT index `m`.
#[inline]
fn raw_wavenumber(m: usize, n: usize) -> f64 {
    if m < n / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    }
}

/// Reusable split-step machinery for one grid.
pub(crate) struct Stepper {
    grid: Grid,
    scratch: Vec<Complex64>,
    drift: Vec<Complex64>,
    drift_step: f64,
    field: Vec<f64>,
}

impl Stepper {
    pub(crate) fn new(grid: Grid) -> Stepper {
        Stepper { grid, scratch: Vec::new(), drift: Vec::new(), drift_step: f64::NAN, field: vec![0.0; grid.len()] }
    }

    fn prepare_drift(&mut self, h: f64) {
        if self.drift_step == h && !self.drift.is_empty() {
            return;
        }
        let g = self.grid;
        let n = g.n();
        let dk = g.freq_spacing();
        let norm = 1.0 / g.len() as f64;
        let k2: Vec<f64> = (0..n).map(|m| (raw_wavenumber(m, n) * dk).powi(2)).collect();
        self.drift = (0..g.len())
            .map(|idx| {
                let [i, j] = g.unflatten(idx);
                let q = if g.dim() == 1 { k2[i] } else { k2[i] + k2[j] };
                Complex64::from_polar(norm, -0.5 * h * q)
            })
            .collect();
        self.drift_step = h;
    }

    /// Exact free step of length `h` (multiplier symmetric in the axes, so the
    /// transposed intermediate layout is harmless).
    fn drift(&mut self, buf: &mut [Complex64], h: f64) {
        self.prepare_drift(h);
        let n = self.grid.n();
        let dim = self.grid.dim();
        fft::dft_to_transposed(buf, n, dim, &mut self.scratch);
        for (v, m) in buf.iter_mut().zip(&self.drift) {
            *v *= m;
        }
        fft::dft_from_transposed(buf, n, dim, &mut self.scratch);
    }

    fn load_field(&mut self, potential: &dyn Profile, shift: Vec2) {
        let grid = self.grid;
        potential.sample_shifted_into(&grid, shift, &mut self.field);
    }

    fn kick(&self, buf: &mut [Complex64], tau: f64) {
        for (v, &w) in buf.iter_mut().zip(&self.field) {
            if w != 0.0 {
                *v *= Complex64::from_polar(1.0, -tau * w);
            }
        }
    }

    /// Strang evolution from `t0` to `t1` in `steps` equal steps under
    /// `H₀ + V(x + tρ)`. Running it back from `t1` to `t0` with the same step
    /// count is the exact inverse (and adjoint) of the discrete map.
    ///
    /// `observe` is called at every node `t0 + kh` with the state at that node.
    pub(crate) fn evolve(
        &mut self,
        buf: &mut [Complex64],
        potential: &dyn Profile,
        velocity: Vec2,
        t0: f64,
        t1: f64,
        steps: usize,
        mut observe: Option<&mut dyn FnMut(f64, &[Complex64])>,
    ) {
        let steps = steps.max(1);
        let h = (t1 - t0) / steps as f64;
        if potential.is_zero() {
            if let Some(obs) = observe.as_mut() {
                obs(t0, buf);
                for k in 0..steps {
                    self.drift(buf, h);
                    obs(t0 + (k + 1) as f64 * h, buf);
                }
            } else {
                self.drift(buf, t1 - t0);
            }
            return;
        }
        let moving = velocity != [0.0, 0.0];
        let at = |t: f64| [t * velocity[0], t * velocity[1]];
        self.load_field(potential, at(t0));
        if let Some(obs) = observe.as_mut() {
            obs(t0, buf);
        }
        self.kick(buf, 0.5 * h);
        for k in 0..steps {
            self.drift(buf, h);
            let t = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
            if moving {
                self.load_field(potential, at(t));
            }
            if k + 1 == steps || observe.is_some() {
                self.kick(buf, 0.5 * h);
                if let Some(obs) = observe.as_mut() {
                    obs(t, buf);
                }
                if k + 1 < steps {
                    self.kick(buf, 0.5 * h);
                }
            } else {
                self.kick(buf, h);
            }
        }
    }

    /// Exact free evolution by `t` on a raw buffer.
    pub(crate) fn free(&mut self, buf: &mut [Complex64], t: f64) {
        self.drift(buf, t);
    }
}

/// Split-step evolution of `state` from `t0` to `t1` under `H₀ + V(x + tρ)`
/// with steps no longer than `dt`. `velocity = 0` is the ordinary lab frame.
pub fn evolve_in_frame(state: &State, potential: &dyn Profile, velocity: Vec2, t0: f64, t1: f64, dt: f64) -> State {
    let steps = EvolutionConfig { dt }.steps_for(t1 - t0);
    let mut stepper = Stepper::new(*state.grid());
    let mut buf = state.values().to_vec();
    stepper.evolve(&mut buf, potential, velocity, t0, t1, steps, None);
    State::from_raw(*state.grid(), buf)
}

/// `e^{-itH}` by Strang splitting with a static potential.
pub fn full_evolve(state: &State, t: f64, potential: &dyn Profile, cfg: &EvolutionConfig) -> Result<State> {
    let kc = state.mean_momentum();
    cfg.check_phase_rule(dot(kc, kc))?;
    Ok(evolve_in_frame(state, potential, [0.0, 0.0], 0.0, t, cfg.dt))
}

fn lattice_aligned(grid: &Grid, rho: Vec2) -> bool {
    let dk = grid.freq_spacing();
    let comps = if grid.dim() == 1 { &rho[..1] } else { &rho[..] };
    comps.iter().all(|c| {
        let q = c / dk;
        (q - q.round()).abs() < 1e-9
    }) && (grid.dim() == 2 || rho[1] == 0.0)
}

/// `‖e^{-ix·ρ} e^{-itH₀}(e^{ix·ρ}u) - e^{-it|ρ|²/2} E_ρ^t e^{-itH₀}u‖`, with
/// `E_ρ^t` the translation by `tρ`. Zero up to roundoff for lattice-aligned `ρ`.
pub fn boost_conjugation_check(state: &State, rho: Vec2, t: f64) -> Result<f64> {
    if !lattice_aligned(state.grid(), rho) {
        return Err(Error::config("boost must be aligned with the frequency lattice"));
    }
    let lhs = modulate(&free_evolve(&boost(state, rho)?, t), [-rho[0], -rho[1]]);
    let phase = Complex64::from_polar(1.0, -0.5 * t * dot(rho, rho));
    let rhs = translate(&free_evolve(state, t), [t * rho[0], t * rho[1]]).scale(phase);
    Ok(lhs.sub(&rhs)?.l2_norm())
}

/// Fraction of the spectral mass of `state` outside the ball `B(center, radius)`.
pub fn spectral_mass_outside(state: &State, center: Vec2, radius: f64) -> f64 {
    let spec = fft_forward(state);
    let g = *spec.grid();
    let mut total = 0.0;
    let mut outside = 0.0;
    for (k, v) in spec.values().iter().enumerate() {
        let xi = g.point(k);
        let w = v.norm_sqr();
        total += w;
        if norm2([xi[0] - center[0], xi[1] - center[1]]) > radius {
            outside += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outside / total
    }
}

fn require_band_limited(packet: &State) -> Result<()> {
    let outside = spectral_mass_outside(packet, [0.0, 0.0], 1.0);
    if outside > 1e-12 {
        return Err(Error::config(format!("packet is not band-limited to B(0,1): outside mass {outside:.2e}")));
    }
    Ok(())
}

/// Fraction of `‖u‖²` at nodes where `region(x)` holds.
pub fn region_mass_fraction(state: &State, region: impl Fn(Vec2) -> bool) -> f64 {
    let g = *state.grid();
    let mut total = 0.0;
    let mut inside = 0.0;
    for (k, v) in state.values().iter().enumerate() {
        let w = v.norm_sqr();
        total += w;
        if region(g.point(k)) {
            inside += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(&x, &y)| (x.ln(), y.max(f64::MIN_POSITIVE).ln())).collect();
    crate::fit::least_squares(&pts).0
}

/// Keeps the points whose abscissa lies in the top decade `[x_max/10, x_max]`.
fn last_decade(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let top = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    xs.iter().zip(ys).filter(|(&x, _)| x >= top / 10.0 * (1.0 - 1e-12)).map(|(&x, &y)| (x, y)).unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeRow {
    pub t: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeTable {
    pub open_set_radius: f64,
    pub rows: Vec<ConeRow>,
    /// Log-log slope over the largest time decade.
    pub slope: f64,
    pub boundary_flag: bool,
}

/// Mass of `e^{-itH₀}Φ` in `{|x/t| > r}` for each `t`.
pub fn cone_decay_diagnostic(packet: &State, open_set_radius: f64, times: &[f64]) -> Result<ConeTable> {
    require_band_limited(packet)?;
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::config("cone diagnostic times must be positive"));
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut boundary_flag = false;
    for &t in times {
        let w = free_evolve(packet, t);
        boundary_flag |= w.boundary_mass_fraction() > BOUNDARY_TOL;
        let fraction = region_mass_fraction(&w, |x| norm2(x) > open_set_radius * t);
        rows.push(ConeRow { t, fraction });
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let fs: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
    let (xt, yt) = last_decade(&ts, &fs);
    let slope = if xt.len() >= 2 { loglog_slope(&xt, &yt) } else { f64::NAN };
    Ok(ConeTable { open_set_radius, rows, slope, boundary_flag })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub t: f64,
    /// `⟨tρ⟩`
    pub displacement: f64,
    /// `‖V(x + tρ) e^{-itH₀}Φ‖` with the analytic potential.
    pub translated: f64,
    /// `‖V e^{-itH₀}Φ_ρ‖` in the lab frame; absent when the boosted packet
    /// leaves the box or the grid cannot carry the boost.
    pub lab: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    pub rows: Vec<OverlapRow>,
    pub slope: f64,
    pub max_route_gap: f64,
    pub boundary_flag: bool,
}

/// Overlap of a boosted free packet with the potential, computed in the lab
/// frame and via the translated potential `V(x + tρ)`.
pub fn overlap_decay_diagnostic(
    potential: &dyn Profile,
    packet: &State,
    boost_: &Boost,
    times: &[f64],
) -> Result<OverlapTable> {
    if boost_.speed() <= 4.0 {
        return Err(Error::config("overlap diagnostic needs |rho| > 4"));
    }
    require_band_limited(packet)?;
    let grid = *packet.grid();
    let rho = boost_.rho();
    let lab_ok = grid.require_nyquist(boost_.speed()).is_ok();
    let boosted = if lab_ok { Some(boost(packet, rho)?) } else { None };
    let mut rows = Vec::with_capacity(times.len());
    let mut boundary_flag = false;
    let mut field = vec![0.0; grid.len()];
    let lab_field = potential.sample(&grid);
    let mut gap: f64 = 0.0;
    for &t in times {
        let w = free_evolve(packet, t);
        boundary_flag |= w.boundary_mass_fraction() > BOUNDARY_TOL;
        potential.sample_shifted_into(&grid, [t * rho[0], t * rho[1]], &mut field);
        let translated = w.mul_real(&field)?.l2_norm();
        let lab = match &boosted {
            Some(b) => {
                let wl = free_evolve(b, t);
                if wl.boundary_mass_fraction() <= BOUNDARY_TOL {
                    Some(wl.mul_real(&lab_field)?.l2_norm())
                } else {
                    None
                }
            }
            None => None,
        };
        if let Some(l) = lab {
            gap = gap.max((l - translated).abs());
        }
        rows.push(OverlapRow { t, displacement: japanese(t * boost_.speed()), translated, lab });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.displacement).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.translated).collect();
    let (xt, yt) = last_decade(&xs, &ys);
    let slope = if xt.len() >= 2 && yt.iter().all(|&y| y > 0.0) { loglog_slope(&xt, &yt) } else { f64::NAN };
    Ok(OverlapTable { rows, slope, max_route_gap: gap, boundary_flag })
}

/// Closed-form free evolution of the Gaussian `exp(-|x - x0|²/(2s²) + i k0·x)`:
/// with `a = s² + it`,
/// `u(x,t) = (s²/a)^{n/2} exp(-|x - x0 - k0 t|²/(2a) + i k0·(x - x0) - it|k0|²/2 + i k0·x0)`.
pub fn free_gaussian(x: Vec2, t: f64, dim: usize, s: f64, x0: Vec2, k0: Vec2) -> Complex64 {
    let a = Complex64::new(s * s, t);
    let pref = (Complex64::new(s * s, 0.0) / a).powf(0.5 * dim as f64);
    let d = [x[0] - x0[0] - k0[0] * t, x[1] - x0[1] - k0[1] * t];
    let d2 = if dim == 1 { d[0] * d[0] } else { dot(d, d) };
    let phase = dot(k0, x) - 0.5 * t * dot(k0, k0);
    pref * (-d2 / (2.0 * a)).exp() * Complex64::from_polar(1.0, phase)
}
