//! Recovery of `F(V₁ - V₂)` from high-velocity scattering pairings.
//!
//! For a direction `ω` the difference `D = S₁ - S₂` is applied once, in the
//! frame moving with `ρ = √λ ω`, to a separable packet
//! `Φ̂(ξ) = θ(ω·ξ) φ_h(ω⊥·ξ)`. Pairing `i√λ D Φ` against mollifier probes
//! centred at `η ∈ ω⊥` reads off `(F_{ω⊥}X(V) * φ_h)(η)`, and the Fourier slice
//! relation turns this into `F(V)(η)`.

use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::grid::{
    dot, fft_forward, fft_inverse, from_spectrum, norm2, rot90, weighted_norm, Boost, Grid, GridSpec, NormKind, State,
    Vec2, BOUNDARY_TOL,
};
use crate::potentials::{PotentialPair, Profile};
use crate::scattering::{scattering_apply_moving, ScatteringConfig};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Along-`ω` profile `θ(s) = b(|s|/a)`, so `θ(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theta {
    pub half_width: f64,
    pub sharpness: f64,
}

impl Theta {
    pub fn eval(&self, s: f64) -> f64 {
        BumpProfile::new(self.sharpness).eval(s / self.half_width)
    }
}

/// How `ε` and `h` follow `λ`: `ε = λ^{-a}`, `h = ε^{b}`, unless pinned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub epsilon_exponent: f64,
    pub h_exponent: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { epsilon_exponent: 0.125, h_exponent: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub lambda: f64,
    /// Mollifier width; follows the schedule when absent.
    pub epsilon: Option<f64>,
    /// Width of `φ_h`; follows the schedule when absent.
    pub h: Option<f64>,
    pub schedule: Schedule,
    pub theta: Theta,
    /// Sharpness of `φ₀` (support `B(0, 1/2)` on `ω⊥`, unit mass).
    pub phi0_sharpness: f64,
    /// Sharpness of `ψ₀` (support `B(0, 1)`, unit mass).
    pub psi0_sharpness: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    /// Weight exponent of the `L²_σ` norm in the error budget.
    pub sigma: f64,
    /// Divide by the along-`ω` transfer `c(ε) = ∫θ m_ε` of the mollifier.
    pub mass_correction: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            lambda: 400.0,
            epsilon: None,
            h: None,
            schedule: Schedule::default(),
            theta: Theta { half_width: 0.5, sharpness: 8.0 },
            phi0_sharpness: 8.0,
            psi0_sharpness: 8.0,
            gamma: 0.5,
            gamma_prime: 0.5,
            sigma: 1.6,
            mass_correction: true,
        }
    }
}

impl ProbeConfig {
    pub fn with_lambda(&self, lambda: f64) -> ProbeConfig {
        ProbeConfig { lambda, ..*self }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or_else(|| self.lambda.powf(-self.schedule.epsilon_exponent))
    }

    pub fn h(&self) -> f64 {
        self.h.unwrap_or_else(|| self.epsilon().powf(self.schedule.h_exponent))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 16.0) {
            return Err(Error::config(format!("probe lambda must exceed 16, got {}", self.lambda)));
        }
        let (e, h) = (self.epsilon(), self.h());
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::config(format!("epsilon must lie in (0, 1), got {e}")));
        }
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::config(format!("h must lie in (0, 1), got {h}")));
        }
        if !(self.theta.half_width > 0.0 && self.theta.half_width <= 0.5) {
            return Err(Error::config("theta support must lie inside (-1/2, 1/2)"));
        }
        for (name, v) in [("gamma", self.gamma), ("gamma_prime", self.gamma_prime)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.theta.sharpness > 0.0 && self.phi0_sharpness > 0.0 && self.psi0_sharpness > 0.0) {
            return Err(Error::config("bump sharpness must be positive"));
        }
        Ok(())
    }

    /// `φ_h(ζ) = h^{-1} φ₀(ζ/h)` with `φ₀(ζ) = b(2|ζ|)/Z` of unit mass.
    pub fn phi_h(&self) -> impl Fn(f64) -> f64 {
        let b = BumpProfile::new(self.phi0_sharpness);
        let z = 0.5 * b.integral_1d();
        let h = self.h();
        move |zeta: f64| b.eval(2.0 * zeta / h) / (z * h)
    }

    /// `∫|ζ|^{γ'} φ₀(ζ) dζ`.
    fn phi0_moment(&self) -> f64 {
        let b = BumpProfile::new(self.phi0_sharpness);
        let g = self.gamma_prime;
        2f64.powf(-1.0 - g) * b.moment_1d(g) / (0.5 * b.integral_1d())
    }
}

fn require_nodes(what: &str, width: f64, grid: &Grid) -> Result<()> {
    let nodes = width / grid.freq_spacing();
    if nodes < 8.0 {
        return Err(Error::Resolution(format!(
            "{what} of width {width:.3} spans {nodes:.1} frequency nodes (need 8); enlarge the grid half width"
        )));
    }
    Ok(())
}

/// `Φ̂(ξ) = θ(ω·ξ) φ(ω⊥·ξ)`, built on the frequency lattice.
pub fn separable_packet(theta: &Theta, phi: &dyn Fn(f64) -> f64, omega: Vec2, grid: Grid) -> Result<State> {
    if grid.dim() != 2 {
        return Err(Error::config("separable packets need a 2-D grid"));
    }
    if !(theta.half_width > 0.0 && theta.half_width <= 0.5) {
        return Err(Error::config("theta support must lie inside (-1/2, 1/2)"));
    }
    let perp = rot90(omega);
    let u = from_spectrum(grid, |xi| Complex64::new(theta.eval(dot(xi, omega)) * phi(dot(xi, perp)), 0.0));
    let outside = crate::propagator::spectral_mass_outside(&u, [0.0, 0.0], 1.0);
    if outside > 1e-14 {
        return Err(Error::config(format!("separable packet spectrum leaves B(0,1): outside mass {outside:.2e}")));
    }
    Ok(u)
}

/// The separable probe used for direction `ω` under `probe`.
pub fn probe_packet(probe: &ProbeConfig, omega: Vec2, grid: Grid) -> Result<State> {
    require_nodes("theta support", 2.0 * probe.theta.half_width, &grid)?;
    require_nodes("phi_h support", probe.h(), &grid)?;
    let phi = probe.phi_h();
    separable_packet(&probe.theta, &phi, omega, grid)
}

/// Mollifier probe: inverse transform of `ψ_ε(ξ) = ε^{-n} ψ₀((ξ - c)/ε)`.
/// `ψ₀` is normalized so the lattice sum of `ψ_ε` is exactly one.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub state: State,
    pub center: Vec2,
    pub epsilon: f64,
    /// `Σ ψ_ε Δξ^n` (one up to roundoff).
    pub mass: f64,
    spectrum: State,
}

impl Mollifier {
    pub fn spectrum(&self) -> &State {
        &self.spectrum
    }
}

pub fn mollifier_packet(center: Vec2, epsilon: f64, psi0: BumpProfile, grid: Grid) -> Result<Mollifier> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    require_nodes("mollifier support", 2.0 * epsilon, &grid)?;
    let reach = norm2(center) + epsilon;
    if reach >= grid.xi_max() {
        return Err(Error::Nyquist {
            required: reach,
            available: grid.xi_max(),
            min_points: ((2.0 * grid.half_width() * reach / PI).ceil() as usize + 1).next_power_of_two(),
        });
    }
    let dual = grid.dual();
    let c = if grid.dim() == 1 { [center[0], 0.0] } else { center };
    let raw = State::from_fn(dual, |xi| Complex64::new(psi0.eval(norm2([xi[0] - c[0], xi[1] - c[1]]) / epsilon), 0.0));
    let cell = dual.cell_volume();
    let total: f64 = raw.values().iter().map(|v| v.re).sum::<f64>() * cell;
    let spectrum = raw.scale(Complex64::new(1.0 / total, 0.0));
    let mass = spectrum.values().iter().map(|v| v.re).sum::<f64>() * cell;
    Ok(Mollifier { state: fft_inverse(&spectrum), center: c, epsilon, mass, spectrum })
}

/// `c(ε) = Σ θ(ω·ξ) ψ_ε(ξ) Δξ²`: the part of the mollifier mass seen through `θ`.
pub fn transfer_mass(theta: &Theta, omega: Vec2, mollifier: &Mollifier) -> f64 {
    let spec = mollifier.spectrum();
    let g = *spec.grid();
    spec.values().iter().enumerate().map(|(k, v)| theta.eval(dot(g.point(k), omega)) * v.re).sum::<f64>()
        * g.cell_volume()
}

/// One scattering pairing with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingRecord {
    pub lambda: f64,
    pub omega: Vec2,
    pub phi_id: String,
    pub psi_id: String,
    pub value: Complex64,
    pub horizon: f64,
    pub converged: bool,
    pub boundary_ok: bool,
}

/// `(S₁ - S₂)Φ` in the frame moving with `ρ = √λ ω`.
#[derive(Debug, Clone)]
pub struct AppliedDifference {
    pub boost: Boost,
    pub diff: State,
    pub horizon: f64,
    pub converged: bool,
    pub boundary_ok: bool,
}

impl AppliedDifference {
    /// `i√λ ⟨(S₁ - S₂)Φ_ρ, Ψ_ρ⟩`.
    pub fn pair_with(&self, psi: &State) -> Result<Complex64> {
        Ok(Complex64::new(0.0, self.boost.speed()) * self.diff.inner(psi)?)
    }
}

pub fn apply_difference(
    pair: &PotentialPair,
    boost: &Boost,
    phi: &State,
    cfg: &ScatteringConfig,
) -> Result<AppliedDifference> {
    let rho = boost.rho();
    if pair.is_trivial() {
        return Ok(AppliedDifference {
            boost: *boost,
            diff: State::zeros(*phi.grid()),
            horizon: 0.0,
            converged: true,
            boundary_ok: phi.boundary_mass_fraction() <= BOUNDARY_TOL,
        });
    }
    let s1 = scattering_apply_moving(&pair.v1, phi, rho, cfg)?;
    let s2 = scattering_apply_moving(&pair.v2, phi, rho, cfg)?;
    Ok(AppliedDifference {
        boost: *boost,
        diff: s1.state.sub(&s2.state)?,
        horizon: s1.horizon.max(s2.horizon),
        converged: s1.converged && s2.converged,
        boundary_ok: s1.boundary_ok() && s2.boundary_ok() && phi.boundary_mass_fraction() <= BOUNDARY_TOL,
    })
}

/// `i√λ⟨(S_{V₁} - S_{V₂})Φ_ρ, Ψ_ρ⟩` with `ρ = √λ ω`.
pub fn pairing_xray_estimate(
    pair: &PotentialPair,
    boost: &Boost,
    phi: &State,
    psi: &State,
    cfg: &ScatteringConfig,
) -> Result<PairingRecord> {
    let applied = apply_difference(pair, boost, phi, cfg)?;
    Ok(PairingRecord {
        lambda: boost.lambda,
        omega: boost.omega,
        phi_id: "phi".into(),
        psi_id: "psi".into(),
        value: applied.pair_with(psi)?,
        horizon: applied.horizon,
        converged: applied.converged,
        boundary_ok: applied.boundary_ok,
    })
}

/// `≈ F(fΦ)(η)`: pairing of `(S₁ - S₂)Φ` with the mollifier centred at `η`
/// (the modulated probe `e^{ix·η/2}Ψ_ε`).
pub fn fourier_point_estimate(applied: &AppliedDifference, eta: Vec2, probe: &ProbeConfig) -> Result<Complex64> {
    let m = mollifier_packet(eta, probe.epsilon(), BumpProfile::new(probe.psi0_sharpness), *applied.diff.grid())?;
    applied.pair_with(&m.state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSample {
    /// Coordinate of `η` along `ω⊥`.
    pub eta: f64,
    /// `≈ (F_{ω⊥}f * φ_h)(η)` after Hermitian averaging.
    pub value: Complex64,
    /// Estimates at `+η` and `-η` before averaging.
    pub at_plus: Complex64,
    pub at_minus: Complex64,
    pub transfer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEstimate {
    pub omega: Vec2,
    pub lambda: f64,
    pub epsilon: f64,
    pub h: f64,
    pub samples: Vec<SliceSample>,
    /// Bound on `|(F_{ω⊥}f * φ_h)(η) - F_{ω⊥}f(η)|` from the modulus of continuity.
    pub bias_bound: f64,
    pub horizon: f64,
    pub converged: bool,
    pub boundary_ok: bool,
}

/// `(2π)^{-1/2} 2^{1-γ'} h^{γ'} ∫|ζ|^{γ'}φ₀ · ‖V‖_{L¹_{γ'}}`.
pub fn bias_bound(probe: &ProbeConfig, pair: &PotentialPair, grid: &Grid) -> Result<f64> {
    let g = probe.gamma_prime;
    let field = State::from_real(*grid, &pair.difference().sample(grid))?;
    let l1 = weighted_norm(&field, NormKind::L1Weighted(g));
    Ok((2.0 * PI).powf(-0.5) * 2f64.powf(1.0 - g) * probe.h().powf(g) * probe.phi0_moment() * l1)
}

/// Slice estimates at the coordinates `etas` (along `ω⊥`) from one application
/// of `S₁ - S₂`.
pub fn slice_estimate(
    pair: &PotentialPair,
    omega: Vec2,
    etas: &[f64],
    probe: &ProbeConfig,
    grid: Grid,
    cfg: &ScatteringConfig,
) -> Result<SliceEstimate> {
    probe.validate()?;
    let boost = Boost::for_probe(probe.lambda, omega)?;
    let phi = probe_packet(probe, omega, grid)?;
    let applied = apply_difference(pair, &boost, &phi, cfg)?;
    slice_from_applied(&applied, pair, etas, probe, grid)
}

fn slice_from_applied(
    applied: &AppliedDifference,
    pair: &PotentialPair,
    etas: &[f64],
    probe: &ProbeConfig,
    grid: Grid,
) -> Result<SliceEstimate> {
    let omega = applied.boost.omega;
    let perp = rot90(omega);
    let psi0 = BumpProfile::new(probe.psi0_sharpness);
    let root = (2.0 * PI).sqrt();
    let one = |coord: f64| -> Result<(Complex64, f64)> {
        let m = mollifier_packet([coord * perp[0], coord * perp[1]], probe.epsilon(), psi0, grid)?;
        let c = if probe.mass_correction { transfer_mass(&probe.theta, omega, &m) } else { 1.0 };
        Ok((applied.pair_with(&m.state)? * root / c, c))
    };
    let mut samples = Vec::with_capacity(etas.len());
    for &eta in etas {
        let (plus, c) = one(eta)?;
        let minus = if eta == 0.0 { plus } else { one(-eta)?.0 };
        samples.push(SliceSample {
            eta,
            value: (plus + minus.conj()) * 0.5,
            at_plus: plus,
            at_minus: minus,
            transfer: c,
        });
    }
    Ok(SliceEstimate {
        omega,
        lambda: applied.boost.lambda,
        epsilon: probe.epsilon(),
        h: probe.h(),
        samples,
        bias_bound: bias_bound(probe, pair, &grid)?,
        horizon: applied.horizon,
        converged: applied.converged,
        boundary_ok: applied.boundary_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionConfig {
    /// Frequency cutoff `R`.
    pub cutoff: f64,
    /// Grid on which pairings are simulated.
    pub simulation: GridSpec,
    /// Grid on which `F(V)` is assembled and inverted.
    pub output: GridSpec,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            cutoff: 2.0,
            simulation: GridSpec { dim: 2, n: 256, half_width: 96.0 },
            output: GridSpec { dim: 2, n: 32, half_width: 8.0 },
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self, probe: &ProbeConfig) -> Result<(Grid, Grid)> {
        let sim = self.simulation.build()?;
        let out = self.output.build()?;
        if sim.dim() != 2 || out.dim() != 2 {
            return Err(Error::config("reconstruction runs in two dimensions"));
        }
        if !(self.cutoff > 0.0) {
            return Err(Error::config("cutoff must be positive"));
        }
        if self.cutoff + probe.epsilon() >= sim.xi_max() {
            return Err(Error::Nyquist {
                required: self.cutoff + probe.epsilon(),
                available: sim.xi_max(),
                min_points: sim.n() * 2,
            });
        }
        if self.cutoff >= out.xi_max() {
            return Err(Error::config("cutoff exceeds the output frequency lattice"));
        }
        Ok((sim, out))
    }
}

/// `F(V)` on the output frequency lattice inside `|η| ≤ R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledField {
    pub output: GridSpec,
    pub cutoff: f64,
    pub lambda: f64,
    /// Natural-order spectrum on the output dual lattice; `None` outside the
    /// ball or where estimation failed.
    pub values: Vec<Option<Complex64>>,
    pub nodes: usize,
    pub missing: usize,
    pub directions: usize,
    pub bias_bound: f64,
    pub all_converged: bool,
    pub boundary_ok: bool,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Output-lattice nodes grouped by the ray through the origin they lie on.
/// Returns `(primitive direction, [(flat index, multiple, sign)])`.
fn group_by_direction(out: &Grid, cutoff: f64) -> (Vec<usize>, Vec<((i64, i64), Vec<(usize, i64)>)>) {
    let n = out.n() as i64;
    let dk = out.freq_spacing();
    let mut zero = Vec::new();
    let mut groups: std::collections::BTreeMap<(i64, i64), Vec<(usize, i64)>> = Default::default();
    for idx in 0..out.len() {
        let [i, j] = out.unflatten(idx);
        let (k1, k2) = (i as i64 - n / 2, j as i64 - n / 2);
        if ((k1 * k1 + k2 * k2) as f64).sqrt() * dk > cutoff * (1.0 + 1e-12) {
            continue;
        }
        if k1 == 0 && k2 == 0 {
            zero.push(idx);
            continue;
        }
        let g = gcd(k1, k2);
        let (mut p1, mut p2) = (k1 / g, k2 / g);
        let mut mult = g;
        if p2 < 0 || (p2 == 0 && p1 < 0) {
            p1 = -p1;
            p2 = -p2;
            mult = -g;
        }
        groups.entry((p1, p2)).or_default().push((idx, mult));
    }
    (zero, groups.into_iter().collect())
}

/// Estimates `F(V)(η)` at every output node with `|η| ≤ R`, using for each
/// node the direction `ω` with `η ∈ ω⊥`.
pub fn assemble_fourier(
    pair: &PotentialPair,
    recon: &ReconstructionConfig,
    probe: &ProbeConfig,
    cfg: &ScatteringConfig,
) -> Result<AssembledField> {
    probe.validate()?;
    let (sim, out) = recon.validate(probe)?;
    let dk = out.freq_spacing();
    let (zero, groups) = group_by_direction(&out, recon.cutoff);
    let root = (2.0 * PI).sqrt();

    // One task per ray; the zero frequency rides along with the first ray.
    let tasks: Vec<(Vec2, Vec<f64>)> = groups
        .iter()
        .map(|((p1, p2), nodes)| {
            let len = ((p1 * p1 + p2 * p2) as f64).sqrt();
            let u = [*p1 as f64 / len, *p2 as f64 / len];
            let omega = [u[1], -u[0]];
            let mut mults: Vec<i64> = nodes.iter().map(|(_, m)| m.abs()).collect();
            mults.sort_unstable();
            mults.dedup();
            (omega, mults.iter().map(|&m| m as f64 * len * dk).collect())
        })
        .collect();
    let results: Vec<Result<SliceEstimate>> = tasks
        .par_iter()
        .enumerate()
        .map(|(t, (omega, etas))| {
            let mut etas = etas.clone();
            if t == 0 && !zero.is_empty() {
                etas.insert(0, 0.0);
            }
            slice_estimate(pair, *omega, &etas, probe, sim, cfg)
        })
        .collect();

    let mut values: Vec<Option<Complex64>> = vec![None; out.len()];
    let mut nodes = zero.len();
    let mut missing = 0;
    let mut all_converged = true;
    let mut boundary_ok = true;
    let mut bias: f64 = 0.0;
    for (t, (((p1, p2), group), res)) in groups.iter().zip(&results).enumerate() {
        nodes += group.len();
        let est = match res {
            Ok(e) => e,
            Err(_) => {
                missing += group.len() + if t == 0 { zero.len() } else { 0 };
                continue;
            }
        };
        all_converged &= est.converged;
        boundary_ok &= est.boundary_ok;
        bias = bias.max(est.bias_bound);
        let len = ((p1 * p1 + p2 * p2) as f64).sqrt();
        for &(idx, mult) in group {
            let coord = mult.abs() as f64 * len * dk;
            let s = est.samples.iter().find(|s| (s.eta - coord).abs() < 1e-9 * (1.0 + coord)).expect("sample");
            let v = s.value / root;
            values[idx] = Some(if mult > 0 { v } else { v.conj() });
        }
        if t == 0 {
            for &idx in &zero {
                values[idx] = Some(Complex64::new(est.samples[0].value.re / root, 0.0));
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::Assembly("cutoff admits no nonzero frequency node".into()));
    }
    if missing as f64 > 0.05 * nodes as f64 {
        let first = results.iter().find_map(|r| r.as_ref().err().cloned());
        return Err(Error::Assembly(format!(
            "{missing} of {nodes} frequency nodes failed (first failure: {})",
            first.map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    Ok(AssembledField {
        output: out.into(),
        cutoff: recon.cutoff,
        lambda: probe.lambda,
        values,
        nodes,
        missing,
        directions: groups.len(),
        bias_bound: bias,
        all_converged,
        boundary_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub lambda: f64,
    pub cutoff: f64,
    /// `‖V_true - V_rec‖_{H⁻¹}`
    pub h_minus_1_error: f64,
    /// Low band: `‖P_R V_true - V_rec‖_{H⁻¹}`.
    pub low_band_error: f64,
    /// High band: `‖(1 - P_R) V_true‖_{H⁻¹}` (irreducible truncation).
    pub high_band_error: f64,
    /// `‖F V_true - assembled‖_{l²(|η| ≤ R)}`.
    pub assembled_l2_error: f64,
    pub true_h_minus_1: f64,
    pub nodes: usize,
    pub missing: usize,
    pub directions: usize,
    pub bias_bound: f64,
    pub all_converged: bool,
    pub boundary_ok: bool,
}

impl ReconstructionReport {
    /// `error ≤ 2·(high band + assembled l²)`.
    pub fn within_budget(&self) -> bool {
        self.h_minus_1_error <= 2.0 * (self.high_band_error + self.assembled_l2_error)
    }
}

/// Inverts the assembled spectrum (zero outside `|η| ≤ R`) and reports the
/// `H⁻¹` error split into the low- and high-frequency parts.
pub fn invert_and_report(assembled: &AssembledField, pair: &PotentialPair) -> Result<(Vec<f64>, ReconstructionReport)> {
    let out = assembled.output.build()?;
    let truth = State::from_real(out, &pair.difference().sample(&out))?;
    let truth_hat = fft_forward(&truth);
    let dual = *truth_hat.grid();
    let zero = Complex64::new(0.0, 0.0);
    let in_ball = |k: usize| norm2(dual.point(k)) <= assembled.cutoff * (1.0 + 1e-12);
    let rec_hat = State::new(dual, assembled.values.iter().map(|v| v.unwrap_or(zero)).collect())?;
    let rec = fft_inverse(&rec_hat);
    let v_rec: Vec<f64> = rec.values().iter().map(|v| v.re).collect();
    let rec_real = State::from_real(out, &v_rec)?;
    let lowpass =
        fft_inverse(&truth_hat.map(|xi, v| if norm2(xi) <= assembled.cutoff * (1.0 + 1e-12) { v } else { zero }));
    let highpass = truth.sub(&lowpass)?;
    let mut l2_err = 0.0;
    for k in 0..dual.len() {
        if in_ball(k) {
            l2_err += (truth_hat.values()[k] - rec_hat.values()[k]).norm_sqr();
        }
    }
    let report = ReconstructionReport {
        lambda: assembled.lambda,
        cutoff: assembled.cutoff,
        h_minus_1_error: weighted_norm(&truth.sub(&rec_real)?, NormKind::SobolevNeg1),
        low_band_error: weighted_norm(&lowpass.sub(&rec_real)?, NormKind::SobolevNeg1),
        high_band_error: weighted_norm(&highpass, NormKind::SobolevNeg1),
        assembled_l2_error: (l2_err * dual.cell_volume()).sqrt(),
        true_h_minus_1: weighted_norm(&truth, NormKind::SobolevNeg1),
        nodes: assembled.nodes,
        missing: assembled.missing,
        directions: assembled.directions,
        bias_bound: assembled.bias_bound,
        all_converged: assembled.all_converged,
        boundary_ok: assembled.boundary_ok,
    };
    Ok((v_rec, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouping_covers_ball_once() {
        let out = Grid::new(2, 32, 8.0).unwrap();
        let (zero, groups) = group_by_direction(&out, 2.0);
        assert_eq!(zero.len(), 1);
        let mut seen = std::collections::HashSet::new();
        for (_, nodes) in &groups {
            for (idx, _) in nodes {
                assert!(seen.insert(*idx));
            }
        }
        let dual = out.dual();
        let count = (0..out.len()).filter(|&k| norm2(dual.point(k)) <= 2.0).count();
        assert_eq!(seen.len() + 1, count);
    }

    #[test]
    fn direction_makes_eta_perpendicular() {
        let out = Grid::new(2, 32, 8.0).unwrap();
        let dk = out.freq_spacing();
        let (_, groups) = group_by_direction(&out, 2.0);
        for ((p1, p2), nodes) in &groups {
            let len = ((p1 * p1 + p2 * p2) as f64).sqrt();
            let u = [*p1 as f64 / len, *p2 as f64 / len];
            let omega = [u[1], -u[0]];
            for &(idx, mult) in nodes {
                let eta = out.dual().point(idx);
                assert!(dot(eta, omega).abs() < 1e-12);
                let coord = mult as f64 * len * dk;
                let perp = rot90(omega);
                assert!((eta[0] - coord * perp[0]).abs() < 1e-12 && (eta[1] - coord * perp[1]).abs() < 1e-12);
            }
        }
    }
}
