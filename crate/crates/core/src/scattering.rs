//! Wave operators, the scattering operator, Duhamel pairings and operator-norm
//! lower bounds.
//!
//! Every operator takes a `velocity ρ`. With `ρ = 0` it is the ordinary
//! lab-frame operator. With `ρ ≠ 0` it returns the conjugated operator
//! `U_ρ^{-1} A U_ρ` where `U_ρ` is multiplication by `e^{ix·ρ}`; e.g.
//! `U_ρ^{-1} S U_ρ = e^{iTH₀} U(T,-T) e^{iTH₀}` with `U` generated by
//! `H₀ + V(x + tρ)`. Pairings are invariant under the conjugation, so
//! `⟨S Φ_ρ, Ψ_ρ⟩` is obtained without ever putting `Φ_ρ` on the grid.

use crate::error::{Error, Result};
use crate::grid::{dot, fft_forward, fft_inverse, norm2, Boost, Grid, State, Vec2, BOUNDARY_TOL};
use crate::potentials::{PotentialPair, Profile};
use crate::propagator::{EvolutionConfig, Stepper};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringConfig {
    /// Initial horizon `T`; chosen from the geometry when absent.
    pub horizon: Option<f64>,
    pub evolution: EvolutionConfig,
    /// Largest fraction of the potential width the potential may travel in
    /// one step (moving frame only).
    pub motion_resolution: f64,
    pub convergence_tol: f64,
    pub horizon_growth: f64,
    pub max_doublings: usize,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        ScatteringConfig {
            horizon: None,
            evolution: EvolutionConfig { dt: 0.1 },
            motion_resolution: 0.5,
            convergence_tol: 1e-6,
            horizon_growth: 2.0,
            max_doublings: 4,
        }
    }
}

impl ScatteringConfig {
    pub fn validate(&self) -> Result<()> {
        EvolutionConfig::new(self.evolution.dt)?;
        if let Some(t) = self.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::config("horizon must be positive"));
            }
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::config("convergence tolerance must be positive"));
        }
        if !(self.horizon_growth > 1.0) {
            return Err(Error::config("horizon growth factor must exceed 1"));
        }
        if !(self.motion_resolution > 0.0) {
            return Err(Error::config("motion resolution must be positive"));
        }
        Ok(())
    }

    /// Step used for a given potential, frame velocity and propagated state.
    pub fn step(&self, potential: &dyn Profile, velocity: Vec2, state: &State) -> f64 {
        let kc = state.mean_momentum();
        let mut dt = self.evolution.dt.min(0.1 / (1.0 + dot(kc, kc)));
        let speed = norm2(velocity);
        if speed > 0.0 && !potential.is_zero() {
            dt = dt.min(self.motion_resolution * potential.length_scale() / speed);
        }
        dt
    }

    /// First horizon tried by the adaptive loop.
    pub fn initial_horizon(&self, potential: &dyn Profile, velocity: Vec2, grid: &Grid) -> f64 {
        if let Some(t) = self.horizon {
            return t;
        }
        let speed = norm2(velocity);
        let box_radius = grid.half_width() * (grid.dim() as f64).sqrt();
        let reach = if potential.is_zero() { 0.0 } else { capped_reach(potential, box_radius) };
        if speed > 0.0 {
            (box_radius + reach) / speed
        } else {
            // packets in B(0,1) move at most L/2 by the first doubling
            0.25 * grid.half_width()
        }
    }
}

/// Result of an operator application with horizon bookkeeping.
#[derive(Debug, Clone)]
pub struct Scattered {
    pub state: State,
    pub horizon: f64,
    pub steps: usize,
    pub converged: bool,
    pub residual: f64,
    /// Largest outer-shell mass fraction seen at the horizon ends.
    pub boundary_mass: f64,
}

impl Scattered {
    pub fn boundary_ok(&self) -> bool {
        self.boundary_mass <= BOUNDARY_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    /// `e^{iTH₀} U(T,-T) e^{iTH₀}`
    S,
    /// `e^{-iTH₀} U(-T,T) e^{-iTH₀}`
    SAdjoint,
    /// `U(0,-T) e^{iTH₀}`
    WaveMinus,
    /// `U(0,T) e^{-iTH₀}`
    WavePlus,
}

fn shell_mass(buf: &[Complex64], grid: &Grid) -> f64 {
    State::from_raw(*grid, buf.to_vec()).boundary_mass_fraction()
}

/// Radius beyond which `|V| < 1e-10`, capped at twice the box radius. Slowly
/// decaying tails would otherwise ask for astronomically long horizons; the
/// doubling loop decides whether the capped start suffices.
fn capped_reach(potential: &dyn Profile, box_radius: f64) -> f64 {
    potential.reach(1e-10).min(2.0 * box_radius)
}

/// Time window during which the potential overlaps the box. Outside it the
/// evolution is free, so periodic wraparound there cannot corrupt the result.
pub fn interaction_window(potential: &dyn Profile, velocity: Vec2, grid: &Grid) -> f64 {
    let speed = norm2(velocity);
    if speed == 0.0 || potential.is_zero() {
        return f64::INFINITY;
    }
    let box_radius = grid.half_width() * (grid.dim() as f64).sqrt();
    (box_radius + capped_reach(potential, box_radius)) / speed
}

fn apply_fixed(
    op: Op,
    potential: &dyn Profile,
    state: &State,
    velocity: Vec2,
    horizon: f64,
    dt: f64,
) -> (State, usize, f64) {
    let grid = *state.grid();
    let mut stepper = Stepper::new(grid);
    let mut buf = state.values().to_vec();
    let t = horizon;
    let (pre, span, post) = match op {
        Op::S => (-t, (-t, t), -t),
        Op::SAdjoint => (t, (t, -t), t),
        Op::WaveMinus => (-t, (-t, 0.0), 0.0),
        Op::WavePlus => (t, (t, 0.0), 0.0),
    };
    let steps = EvolutionConfig { dt }.steps_for(span.1 - span.0);
    // free_evolve(·, s) with s = -T is e^{iTH₀}.
    stepper.free(&mut buf, pre);
    stepper.evolve(&mut buf, potential, velocity, span.0, span.1, steps, None);
    if post != 0.0 {
        stepper.free(&mut buf, post);
    }
    let out = State::from_raw(grid, buf);
    // Shell mass of the (free) trajectory where the interaction starts and ends.
    let w = interaction_window(potential, velocity, &grid).min(t);
    let (t_in, t_out) = (span.0.signum() * w, span.1.signum() * w);
    let mut probe = state.values().to_vec();
    stepper.free(&mut probe, t_in);
    let mut boundary = shell_mass(&probe, &grid);
    if span.1 != 0.0 {
        let mut probe = out.values().to_vec();
        stepper.free(&mut probe, t_out);
        boundary = boundary.max(shell_mass(&probe, &grid));
    } else {
        boundary = boundary.max(out.boundary_mass_fraction());
    }
    (out, steps, boundary)
}

fn apply_adaptive(
    op: Op,
    potential: &dyn Profile,
    state: &State,
    velocity: Vec2,
    cfg: &ScatteringConfig,
) -> Result<Scattered> {
    cfg.validate()?;
    if potential.is_zero() {
        // Every operator is the identity when V = 0 (the free factors cancel).
        return Ok(Scattered {
            state: state.clone(),
            horizon: cfg.initial_horizon(potential, velocity, state.grid()),
            steps: 0,
            converged: true,
            residual: 0.0,
            boundary_mass: state.boundary_mass_fraction(),
        });
    }
    let dt = cfg.step(potential, velocity, state);
    let mut t = cfg.initial_horizon(potential, velocity, state.grid());
    let (mut prev, _, mut boundary) = apply_fixed(op, potential, state, velocity, t, dt);
    let scale = state.l2_norm().max(f64::MIN_POSITIVE);
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_doublings {
        let t_next = t * cfg.horizon_growth;
        let (next, s, b) = apply_fixed(op, potential, state, velocity, t_next, dt);
        residual = next.sub(&prev)?.l2_norm() / scale;
        t = t_next;
        prev = next;
        boundary = boundary.max(b);
        if residual < cfg.convergence_tol {
            return Ok(Scattered {
                state: prev,
                horizon: t,
                steps: s,
                converged: true,
                residual,
                boundary_mass: boundary,
            });
        }
    }
    Err(Error::NonConvergence { stage: format!("{op:?} horizon doubling (T = {t:.3})"), residual })
}

/// `W_± u` (lab frame) as `e^{±iTH} e^{∓iTH₀} u` with adaptive `T`.
pub fn wave_operator_apply(
    potential: &dyn Profile,
    state: &State,
    sign: Sign,
    cfg: &ScatteringConfig,
) -> Result<Scattered> {
    wave_operator_apply_moving(potential, state, [0.0, 0.0], sign, cfg)
}

/// `U_ρ^{-1} W_± U_ρ u`.
pub fn wave_operator_apply_moving(
    potential: &dyn Profile,
    state: &State,
    velocity: Vec2,
    sign: Sign,
    cfg: &ScatteringConfig,
) -> Result<Scattered> {
    let op = match sign {
        Sign::Plus => Op::WavePlus,
        Sign::Minus => Op::WaveMinus,
    };
    apply_adaptive(op, potential, state, velocity, cfg)
}

/// `S u = e^{iTH₀} e^{-2iTH} e^{iTH₀} u` (lab frame) with adaptive `T`.
pub fn scattering_apply(potential: &dyn Profile, state: &State, cfg: &ScatteringConfig) -> Result<Scattered> {
    scattering_apply_moving(potential, state, [0.0, 0.0], cfg)
}

/// `U_ρ^{-1} S U_ρ u`.
pub fn scattering_apply_moving(
    potential: &dyn Profile,
    state: &State,
    velocity: Vec2,
    cfg: &ScatteringConfig,
) -> Result<Scattered> {
    apply_adaptive(Op::S, potential, state, velocity, cfg)
}

/// `U_ρ^{-1} S* U_ρ u` with adaptive `T`.
pub fn scattering_adjoint_apply_moving(
    potential: &dyn Profile,
    state: &State,
    velocity: Vec2,
    cfg: &ScatteringConfig,
) -> Result<Scattered> {
    apply_adaptive(Op::SAdjoint, potential, state, velocity, cfg)
}

/// `S` at a fixed horizon and step; its adjoint counterpart below is the exact
/// adjoint of the same discrete map.
pub fn scattering_at_horizon(potential: &dyn Profile, state: &State, velocity: Vec2, horizon: f64, dt: f64) -> State {
    if potential.is_zero() {
        return state.clone();
    }
    apply_fixed(Op::S, potential, state, velocity, horizon, dt).0
}

pub fn scattering_adjoint_at_horizon(
    potential: &dyn Profile,
    state: &State,
    velocity: Vec2,
    horizon: f64,
    dt: f64,
) -> State {
    if potential.is_zero() {
        return state.clone();
    }
    apply_fixed(Op::SAdjoint, potential, state, velocity, horizon, dt).0
}

/// Value of a Duhamel quadrature with its truncation data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuhamelValue {
    pub value: Complex64,
    pub horizon: f64,
    /// `max(|I(-T)|, |I(T)|) / max_t |I(t)|`
    pub tail: f64,
}

/// Trapezoid quadrature of `∫_{-T}^{T} ⟨V W₋ e^{-itH₀}Φ, e^{-itH₀}Ψ⟩ dt` in the
/// frame moving with `velocity`, which equals `⟨i(S - I)Φ, Ψ⟩` in the limit.
/// With `born`, `W₋` is replaced by the identity.
pub fn duhamel_pairing(
    potential: &dyn Profile,
    phi: &State,
    psi: &State,
    velocity: Vec2,
    cfg: &ScatteringConfig,
    born: bool,
) -> Result<DuhamelValue> {
    cfg.validate()?;
    let grid = *phi.grid();
    if !grid.compatible(psi.grid()) {
        return Err(Error::GridMismatch);
    }
    let t = cfg.initial_horizon(potential, velocity, &grid);
    if potential.is_zero() {
        return Ok(DuhamelValue { value: Complex64::new(0.0, 0.0), horizon: t, tail: 0.0 });
    }
    let dt = cfg.step(potential, velocity, phi);
    let steps = EvolutionConfig { dt }.steps_for(2.0 * t);
    let h = 2.0 * t / steps as f64;
    let vol = grid.cell_volume();

    let mut free_stepper = Stepper::new(grid);
    let mut psi_t = psi.values().to_vec();
    free_stepper.free(&mut psi_t, -t);
    let mut field = vec![0.0; grid.len()];
    let mut samples: Vec<Complex64> = Vec::with_capacity(steps + 1);

    let integrand = |tk: f64, w: &[Complex64], psi_t: &[Complex64], field: &mut [f64]| -> Complex64 {
        potential.sample_shifted_into(&grid, [tk * velocity[0], tk * velocity[1]], field);
        let s: Complex64 = w.iter().zip(psi_t).zip(field.iter()).map(|((a, b), &v)| a * b.conj() * v).sum();
        s * vol
    };

    let mut w = phi.values().to_vec();
    let mut stepper = Stepper::new(grid);
    stepper.free(&mut w, -t);
    if born {
        for k in 0..=steps {
            let tk = -t + k as f64 * h;
            samples.push(integrand(tk, &w, &psi_t, &mut field));
            if k < steps {
                stepper.free(&mut w, h);
                free_stepper.free(&mut psi_t, h);
            }
        }
    } else {
        // W₋ e^{-itH₀}Φ = U(t, -T) e^{iTH₀}Φ, observed at the quadrature nodes.
        let mut nodes: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(steps + 1);
        let mut obs = |tk: f64, b: &[Complex64]| nodes.push((tk, b.to_vec()));
        stepper.evolve(&mut w, potential, velocity, -t, t, steps, Some(&mut obs));
        for (k, (tk, wk)) in nodes.iter().enumerate() {
            samples.push(integrand(*tk, wk, &psi_t, &mut field));
            if k < steps {
                free_stepper.free(&mut psi_t, h);
            }
        }
    }
    let peak = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let tail = if peak > 0.0 { samples[0].norm().max(samples[steps].norm()) / peak } else { 0.0 };
    if tail > cfg.convergence_tol {
        return Err(Error::NonConvergence { stage: "Duhamel integrand truncation".into(), residual: tail });
    }
    let sum: Complex64 = samples.iter().enumerate().map(|(k, s)| if k == 0 || k == steps { s * 0.5 } else { *s }).sum();
    Ok(DuhamelValue { value: sum * h, horizon: t, tail })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveRow {
    pub lambda: f64,
    pub norm: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveTable {
    pub rows: Vec<WaveRow>,
    /// Log-log slope of the norm against `|ρ| = √λ`.
    pub slope: f64,
    pub boundary_flag: bool,
}

/// `‖(W₋ - I)Φ_ρ‖` for each `λ`, `ρ = √λ ω`.
pub fn wave_minus_identity_diagnostic(
    potential: &dyn Profile,
    packet: &State,
    omega: Vec2,
    lambdas: &[f64],
    cfg: &ScatteringConfig,
) -> Result<WaveTable> {
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut boundary_flag = false;
    for &lambda in lambdas {
        let b = Boost::for_probe(lambda, omega)?;
        let out = wave_operator_apply_moving(potential, packet, b.rho(), Sign::Minus, cfg)?;
        boundary_flag |= !out.boundary_ok();
        rows.push(WaveRow { lambda, norm: out.state.sub(packet)?.l2_norm(), horizon: out.horizon });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.lambda.sqrt()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let slope = if rows.len() >= 2 && ys.iter().all(|&y| y > 0.0) {
        crate::propagator::loglog_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(WaveTable { rows, slope, boundary_flag })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    pub probes: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig { probes: 4, iterations: 4, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Lower bound for `‖S₁ - S₂‖` restricted to states with spectrum in
    /// `B(ρ, 1)`.
    pub value: f64,
    /// Running maximum after each iteration (entry 0 is the best probe).
    pub history: Vec<f64>,
    pub horizon: f64,
    pub converged: bool,
}

fn project_band(state: &State, radius: f64) -> State {
    let spec = fft_forward(state);
    fft_inverse(&spec.map(|xi, v| if norm2(xi) <= radius { v } else { Complex64::new(0.0, 0.0) }))
}

/// Random state with spectrum inside `B(0,1)`: a few bumps of radius 1/2 with
/// centers drawn in `B(0, 1/2)` and random complex weights.
pub fn random_band_limited_state(grid: Grid, rng: &mut ChaCha8Rng) -> Result<State> {
    let bumps = 3;
    let mut centers = Vec::with_capacity(bumps);
    while centers.len() < bumps {
        let c = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let c = if grid.dim() == 1 { [c[0], 0.0] } else { c };
        if norm2(c) < 0.5 {
            let w = Complex64::from_polar(rng.random_range(0.5..1.0), rng.random_range(0.0..std::f64::consts::TAU));
            centers.push((c, w));
        }
    }
    let profile = crate::bump::BumpProfile::standard();
    crate::grid::from_spectrum(grid, |xi| {
        centers.iter().map(|(c, w)| w * profile.eval(norm2([xi[0] - c[0], xi[1] - c[1]]) / 0.5)).sum()
    })
    .normalized()
}

/// Power iteration on `P D* D P`, `D = S₁ - S₂`, `P` the projection onto
/// frequencies in `B(0,1)` of the frame moving with `velocity`.
pub fn operator_norm_lower_bound(
    pair: &PotentialPair,
    grid: Grid,
    velocity: Vec2,
    cfg: &ScatteringConfig,
    norm_cfg: &NormConfig,
) -> Result<NormEstimate> {
    if norm_cfg.probes < 4 {
        return Err(Error::config("operator norm estimation needs at least 4 probes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(norm_cfg.seed);
    let probes: Vec<State> =
        (0..norm_cfg.probes).map(|_| random_band_limited_state(grid, &mut rng)).collect::<Result<_>>()?;
    if pair.is_trivial() {
        return Ok(NormEstimate {
            value: 0.0,
            history: vec![0.0; norm_cfg.iterations + 1],
            horizon: 0.0,
            converged: true,
        });
    }
    // Fix one horizon and one step for every application so the adjoint is exact.
    let v1 = pair.v1.clone();
    let v2 = pair.v2.clone();
    let mut horizon: f64 = 0.0;
    for v in [&v1, &v2] {
        if !v.is_zero() {
            horizon = horizon.max(scattering_apply_moving(v, &probes[0], velocity, cfg)?.horizon);
        }
    }
    let dt = cfg.step(&v1, velocity, &probes[0]).min(cfg.step(&v2, velocity, &probes[0]));
    let d = |u: &State| -> Result<State> {
        scattering_at_horizon(&v1, u, velocity, horizon, dt).sub(&scattering_at_horizon(&v2, u, velocity, horizon, dt))
    };
    let d_adj = |u: &State| -> Result<State> {
        scattering_adjoint_at_horizon(&v1, u, velocity, horizon, dt)
            .sub(&scattering_adjoint_at_horizon(&v2, u, velocity, horizon, dt))
    };
    let mut best = (0.0, None);
    for p in &probes {
        let p = project_band(p, 1.0).normalized()?;
        let r = d(&p)?.l2_norm();
        if r > best.0 || best.1.is_none() {
            best = (r, Some(p));
        }
    }
    let mut running = best.0;
    let mut history = vec![running];
    let mut v = best.1.expect("at least one probe");
    for _ in 0..norm_cfg.iterations {
        let dv = d(&v)?;
        let next = project_band(&d_adj(&dv)?, 1.0);
        if next.l2_norm() == 0.0 {
            history.push(running);
            continue;
        }
        v = next.normalized()?;
        running = running.max(d(&v)?.l2_norm());
        history.push(running);
    }
    Ok(NormEstimate { value: running, history, horizon, converged: true })
}
