//! X-ray transform in the plane, the Fourier slice relation and decay fits.

use crate::error::{Error, Result};
use crate::grid::{dot, fft_forward, japanese, norm2, rot90, Grid, State, Vec2};
use crate::potentials::{Potential, PotentialKind, Profile, Superposition};
use serde::{Deserialize, Serialize};

/// Uniform lattice on the line `ω⊥`, `y_j = (-L + jΔy) ω⊥` with `ω⊥ = rot90(ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceGrid {
    pub omega: Vec2,
    line: Grid,
}

impl SliceGrid {
    pub fn new(omega: Vec2, n: usize, half_width: f64) -> Result<SliceGrid> {
        if (norm2(omega) - 1.0).abs() > 1e-12 {
            return Err(Error::config("omega must be a unit vector"));
        }
        Ok(SliceGrid { omega, line: Grid::new(1, n, half_width)? })
    }

    /// Same spacing and extent as one axis of `grid`.
    pub fn from_grid(grid: &Grid, omega: Vec2) -> Result<SliceGrid> {
        if grid.dim() != 2 {
            return Err(Error::config("slice grids live in the plane"));
        }
        SliceGrid::new(omega, grid.n(), grid.half_width())
    }

    pub fn perp(&self) -> Vec2 {
        rot90(self.omega)
    }

    /// The slice coordinates as a one-dimensional grid.
    pub fn line(&self) -> &Grid {
        &self.line
    }

    pub fn coords(&self) -> Vec<f64> {
        self.line.axis()
    }

    pub fn point(&self, j: usize) -> Vec2 {
        let y = self.line.point(j)[0];
        let p = self.perp();
        [y * p[0], y * p[1]]
    }

    pub fn doubled(&self) -> Result<SliceGrid> {
        SliceGrid::new(self.omega, self.line.n() * 2, self.line.half_width() * 2.0)
    }
}

/// Samples of `f(y) = X(V)(y, ω)` on a slice lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XRayField {
    pub slice: SliceGrid,
    pub values: Vec<f64>,
}

const TAIL: f64 = 1e-12;

/// `∫ V(base + τω) dτ` for one analytic term.
fn line_integral(p: &Potential, base: Vec2, omega: Vec2, step: f64) -> Result<f64> {
    if p.amplitude == 0.0 {
        return Ok(0.0);
    }
    let c = p.center2();
    let rel = [c[0] - base[0], c[1] - base[1]];
    let tc = dot(rel, omega);
    let perp = [rel[0] - tc * omega[0], rel[1] - tc * omega[1]];
    let d = norm2(perp);
    let at = |tau: f64| p.eval([base[0] + tau * omega[0], base[1] + tau * omega[1]]);
    match p.kind {
        PotentialKind::RationalDecay => {
            // τ = τc + s·sinh(u) turns the integrand into a multiple of cosh(u)^{1-δ}.
            let s = (p.width * p.width + d * d).sqrt();
            let hu = (step / s).min(0.1);
            let g = |u: f64| at(tc + s * u.sinh()) * s * u.cosh();
            let peak = g(0.0).abs();
            let mut umax = 4.0;
            let mut tries = 0;
            while g(umax).abs().max(g(-umax).abs()) > TAIL * peak {
                umax *= 2.0;
                tries += 1;
                if tries > 12 {
                    return Err(Error::Range(format!("rational line integral tail above {TAIL:e} at u = {umax}")));
                }
            }
            let k = (umax / hu).ceil() as i64;
            Ok((-k..=k).map(|i| g(i as f64 * hu)).sum::<f64>() * hu)
        }
        PotentialKind::Gaussian | PotentialKind::CompactBump => {
            let (range, peak) = if p.kind == PotentialKind::CompactBump {
                if d >= p.width {
                    return Ok(0.0);
                }
                ((p.width * p.width - d * d).sqrt(), at(tc).abs())
            } else {
                let peak = at(tc).abs();
                let mut r = 4.0 * p.width;
                let mut tries = 0;
                while at(tc + r).abs().max(at(tc - r).abs()) > TAIL * p.amplitude.abs() {
                    r *= 2.0;
                    tries += 1;
                    if tries > 60 {
                        return Err(Error::Range("gaussian line integral failed to decay".into()));
                    }
                }
                (r, peak)
            };
            if peak == 0.0 {
                return Ok(0.0);
            }
            let k = (range / step).ceil() as i64;
            Ok((-k..=k).map(|i| at(tc + i as f64 * step)).sum::<f64>() * step)
        }
    }
}

/// `X(V)(x, ω) = ∫ V(x + τω) dτ` for the line through `x`.
pub fn xray_at(potential: &Superposition, omega: Vec2, x: Vec2, step: f64) -> Result<f64> {
    let mut total = 0.0;
    for (c, p) in &potential.terms {
        if *c != 0.0 {
            total += c * line_integral(p, x, omega, step)?;
        }
    }
    Ok(total)
}

/// Forward transform on every line of the slice lattice.
pub fn xray_forward(potential: &Superposition, slice: &SliceGrid, quadrature_step: f64) -> Result<XRayField> {
    if !(quadrature_step > 0.0) {
        return Err(Error::config("quadrature step must be positive"));
    }
    let values = (0..slice.line().n())
        .map(|j| xray_at(potential, slice.omega, slice.point(j), quadrature_step))
        .collect::<Result<Vec<f64>>>()?;
    Ok(XRayField { slice: *slice, values })
}

/// `X(V)(x, ω)` at every node of an ambient grid (lines sharing the same
/// `ω⊥` coordinate are evaluated once).
pub fn xray_on_grid(potential: &Superposition, omega: Vec2, grid: &Grid, step: f64) -> Result<Vec<f64>> {
    let perp = rot90(omega);
    let mut cache: std::collections::HashMap<i64, f64> = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let x = grid.point(k);
        let y = dot(x, perp);
        let key = (y * 1e9).round() as i64;
        let v = match cache.get(&key) {
            Some(v) => *v,
            None => {
                let v = xray_at(potential, omega, [y * perp[0], y * perp[1]], step)?;
                cache.insert(key, v);
                v
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// Line integral of a one-dimensional potential (the degenerate case `ω⊥ = {0}`).
pub fn xray_1d(potential: &Superposition, step: f64) -> Result<f64> {
    xray_at(potential, [1.0, 0.0], [0.0, 0.0], step)
}

/// Axis-aligned X-ray transform of a sampled field by the lattice rule.
pub fn xray_of_samples(field: &[f64], grid: &Grid, axis: usize) -> Result<Vec<f64>> {
    if grid.dim() != 2 || axis > 1 || field.len() != grid.len() {
        return Err(Error::config("sampled X-ray transform needs a 2-D field and axis 0 or 1"));
    }
    let n = grid.n();
    let dx = grid.spacing();
    Ok((0..n)
        .map(|m| (0..n).map(|t| if axis == 0 { field[t * n + m] } else { field[m * n + t] }).sum::<f64>() * dx)
        .collect())
}

/// `F_{ω⊥}(f)` on the slice frequency lattice, as a 1-D spectrum in natural order.
pub fn fourier_slice(field: &XRayField) -> State {
    let line = *field.slice.line();
    let u = State::from_real(line, &field.values).expect("lattice-sized field");
    fft_forward(&u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceCheck {
    pub max_rel_deviation: f64,
    /// Set when `ω` is not axis-aligned and the ambient values were read off the
    /// nearest frequency node.
    pub nearest_lookup: bool,
}

/// Compares `F_{ω⊥}(X_ω V)(η)` against `√(2π)·F(V)(η)` for `η ∈ ω⊥`.
pub fn slice_identity_check(potential: &Superposition, omega: Vec2, grid: &Grid, step: f64) -> Result<SliceCheck> {
    let slice = SliceGrid::from_grid(grid, omega)?;
    let lhs = fourier_slice(&xray_forward(potential, &slice, step)?);
    let ambient = fft_forward(&State::from_real(*grid, &potential.sample(grid))?);
    let dual = *ambient.grid();
    let perp = slice.perp();
    let aligned = perp.iter().all(|c| c.abs() < 1e-14 || (c.abs() - 1.0).abs() < 1e-14);
    let lattice_eta = lhs.grid().axis();
    let root = (2.0 * std::f64::consts::PI).sqrt();
    let mut dev: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (m, &eta) in lattice_eta.iter().enumerate() {
        let a = ambient.values()[dual.nearest_index([eta * perp[0], eta * perp[1]])] * root;
        let s = lhs.values()[m];
        dev = dev.max((s - a).norm());
        scale = scale.max(s.norm());
    }
    Ok(SliceCheck { max_rel_deviation: if scale > 0.0 { dev / scale } else { dev }, nearest_lookup: !aligned })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    /// `max_y |f(y)|⟨y⟩^{δ-1}` over the slice lattice.
    pub constant: f64,
    /// Same on the lattice with doubled range.
    pub constant_doubled: f64,
    /// Maximum restricted to the outer half `L/2 ≤ |y| ≤ L`.
    pub tail_constant: f64,
    pub tail_constant_doubled: f64,
    /// `constant` and `constant_doubled` agree within 5%.
    pub stable: bool,
}

fn decay_constants(field: &XRayField, delta: f64) -> (f64, f64) {
    let l = field.slice.line().half_width();
    let ys = field.slice.coords();
    let mut full: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for (y, f) in ys.iter().zip(&field.values) {
        let w = f.abs() * japanese(*y).powf(delta - 1.0);
        full = full.max(w);
        if y.abs() >= 0.5 * l {
            tail = tail.max(w);
        }
    }
    (full, tail)
}

/// Fits `|f(y)| ≤ C⟨y⟩^{1-δ}` and checks stability under range doubling.
pub fn xray_decay_check(potential: &Superposition, slice: &SliceGrid, delta: f64, step: f64) -> Result<DecayCheck> {
    let (c1, t1) = decay_constants(&xray_forward(potential, slice, step)?, delta);
    let (c2, t2) = decay_constants(&xray_forward(potential, &slice.doubled()?, step)?, delta);
    let stable = if c1 == 0.0 { c2 == 0.0 } else { (c2 - c1).abs() <= 0.05 * c1 };
    Ok(DecayCheck { constant: c1, constant_doubled: c2, tail_constant: t1, tail_constant_doubled: t2, stable })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_bump_line_outside_support_is_zero() {
        let p: Superposition = Potential::compact_bump(1.0, 1.0, [0.0, 0.0]).into();
        assert_eq!(xray_at(&p, [1.0, 0.0], [0.0, 1.5], 0.05).unwrap(), 0.0);
        assert!(xray_at(&p, [1.0, 0.0], [0.0, 0.5], 0.05).unwrap() > 0.0);
    }

    #[test]
    fn slice_points_lie_on_perp() {
        let s = SliceGrid::new([0.6, 0.8], 16, 4.0).unwrap();
        for j in 0..16 {
            assert!(dot(s.point(j), s.omega).abs() < 1e-12);
        }
    }
}
