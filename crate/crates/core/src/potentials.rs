//! Short-range potential families, sampling, decay fits and hypothesis norms.

use crate::error::{Error, Result};
use crate::grid::{dot, japanese, norm2, weighted_norm, Grid, NormKind, State, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Gaussian,
    CompactBump,
    RationalDecay,
}

/// Analytic potential descriptor.
///
/// * gaussian: `A exp(-|x-c|²/w²)`
/// * compact_bump: `A exp(1 - 1/(1 - |x-c|²/w²))` inside `|x-c| < w`
/// * rational_decay: `A ⟨(x-c)/w⟩^{-δ}`
///
/// `decay` is only meaningful for rational decay; the other two families are
/// in every decay class and report `δ = ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Potential {
    pub kind: PotentialKind,
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default)]
    pub decay: Option<f64>,
}

/// Anything that can be evaluated pointwise as a real potential.
pub trait Profile: Sync {
    fn eval(&self, x: Vec2) -> f64;

    /// Writes `V(x + shift)` at every lattice node into `out`.
    fn sample_shifted_into(&self, grid: &Grid, shift: Vec2, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let p = grid.point(k);
            *o = self.eval([p[0] + shift[0], p[1] + shift[1]]);
        }
    }

    /// Radius (from the origin) beyond which `|V| ≤ tol · max|V|`.
    fn reach(&self, tol: f64) -> f64;

    /// Smallest feature width.
    fn length_scale(&self) -> f64;

    fn is_zero(&self) -> bool;

    fn sample(&self, grid: &Grid) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        self.sample_shifted_into(grid, [0.0, 0.0], &mut out);
        out
    }
}

impl Potential {
    pub fn gaussian(amplitude: f64, width: f64, center: Vec2) -> Potential {
        Potential { kind: PotentialKind::Gaussian, amplitude, width, center: center.to_vec(), decay: None }
    }

    pub fn compact_bump(amplitude: f64, width: f64, center: Vec2) -> Potential {
        Potential { kind: PotentialKind::CompactBump, amplitude, width, center: center.to_vec(), decay: None }
    }

    pub fn rational_decay(amplitude: f64, width: f64, center: Vec2, decay: f64) -> Potential {
        Potential { kind: PotentialKind::RationalDecay, amplitude, width, center: center.to_vec(), decay: Some(decay) }
    }

    pub fn zero() -> Potential {
        Potential::gaussian(0.0, 1.0, [0.0, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::config("potential amplitude must be finite"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::config(format!("potential width must be positive, got {}", self.width)));
        }
        if self.center.len() > 2 || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("potential center must have at most two finite components"));
        }
        match (self.kind, self.decay) {
            (PotentialKind::RationalDecay, Some(d)) if d.is_finite() && d > 1.0 => Ok(()),
            (PotentialKind::RationalDecay, d) => {
                Err(Error::config(format!("rational_decay needs decay > 1 (short range), got {d:?}")))
            }
            (_, None) => Ok(()),
            (k, Some(_)) => Err(Error::config(format!("{k:?} potentials take no decay exponent"))),
        }
    }

    pub fn center2(&self) -> Vec2 {
        [self.center.first().copied().unwrap_or(0.0), self.center.get(1).copied().unwrap_or(0.0)]
    }

    /// Decay exponent of the class the potential belongs to (`∞` for the fast families).
    pub fn decay_exponent(&self) -> f64 {
        match self.kind {
            PotentialKind::RationalDecay => self.decay.unwrap_or(f64::NAN),
            _ => f64::INFINITY,
        }
    }

    pub fn scaled(&self, factor: f64) -> Potential {
        Potential { amplitude: self.amplitude * factor, ..self.clone() }
    }

    pub fn translated(&self, shift: Vec2) -> Potential {
        let c = self.center2();
        Potential { center: vec![c[0] + shift[0], c[1] + shift[1]], ..self.clone() }
    }

    /// Profile value as a function of `|x - c| / w`.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        let a = self.amplitude;
        match self.kind {
            PotentialKind::Gaussian => a * (-r * r).exp(),
            PotentialKind::CompactBump => {
                let r2 = r * r;
                if r2 >= 1.0 {
                    0.0
                } else {
                    a * (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
            PotentialKind::RationalDecay => a * (1.0 + r * r).powf(-0.5 * self.decay.unwrap_or(2.0)),
        }
    }
}

impl Profile for Potential {
    #[inline]
    fn eval(&self, x: Vec2) -> f64 {
        let c = self.center2();
        let d = [x[0] - c[0], x[1] - c[1]];
        self.radial(norm2(d) / self.width)
    }

    fn sample_shifted_into(&self, grid: &Grid, shift: Vec2, out: &mut [f64]) {
        if self.amplitude == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        if self.kind == PotentialKind::Gaussian {
            // Separable: exp(-(x²+y²)/w²) = exp(-x²/w²) exp(-y²/w²).
            let c = self.center2();
            let w2 = self.width * self.width;
            let axis = grid.axis();
            let gx: Vec<f64> = axis.iter().map(|&x| (-(x + shift[0] - c[0]).powi(2) / w2).exp()).collect();
            if grid.dim() == 1 {
                let fy = self.amplitude * (-(shift[1] - c[1]).powi(2) / w2).exp();
                for (o, g) in out.iter_mut().zip(&gx) {
                    *o = fy * g;
                }
            } else {
                let gy: Vec<f64> =
                    axis.iter().map(|&y| self.amplitude * (-(y + shift[1] - c[1]).powi(2) / w2).exp()).collect();
                let n = grid.n();
                for i in 0..n {
                    let row = &mut out[i * n..(i + 1) * n];
                    for (o, g) in row.iter_mut().zip(&gy) {
                        *o = gx[i] * g;
                    }
                }
            }
            return;
        }
        for (k, o) in out.iter_mut().enumerate() {
            let p = grid.point(k);
            *o = self.eval([p[0] + shift[0], p[1] + shift[1]]);
        }
    }

    fn reach(&self, tol: f64) -> f64 {
        let r = match self.kind {
            PotentialKind::Gaussian => (1.0 / tol).ln().max(0.0).sqrt(),
            PotentialKind::CompactBump => 1.0,
            PotentialKind::RationalDecay => {
                let d = self.decay.unwrap_or(2.0);
                (tol.powf(-2.0 / d) - 1.0).max(0.0).sqrt()
            }
        };
        norm2(self.center2()) + self.width * r
    }

    fn length_scale(&self) -> f64 {
        self.width
    }

    fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }
}

/// Linear combination `Σ c_k V_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superposition {
    pub terms: Vec<(f64, Potential)>,
}

impl Superposition {
    pub fn new(terms: Vec<(f64, Potential)>) -> Self {
        Superposition { terms }
    }
}

impl From<Potential> for Superposition {
    fn from(p: Potential) -> Self {
        Superposition { terms: vec![(1.0, p)] }
    }
}

impl Profile for Superposition {
    fn eval(&self, x: Vec2) -> f64 {
        self.terms.iter().map(|(c, p)| c * p.eval(x)).sum()
    }

    fn sample_shifted_into(&self, grid: &Grid, shift: Vec2, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; out.len()];
        for (c, p) in &self.terms {
            if *c == 0.0 || p.is_zero() {
                continue;
            }
            p.sample_shifted_into(grid, shift, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += c * t;
            }
        }
    }

    fn reach(&self, tol: f64) -> f64 {
        self.terms.iter().filter(|(c, p)| *c != 0.0 && !p.is_zero()).map(|(_, p)| p.reach(tol)).fold(0.0, f64::max)
    }

    fn length_scale(&self) -> f64 {
        self.terms.iter().filter(|(c, p)| *c != 0.0 && !p.is_zero()).map(|(_, p)| p.width).fold(f64::INFINITY, f64::min)
    }

    fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, p)| *c == 0.0 || p.is_zero())
    }
}

/// Pointwise evaluation of a potential at the lattice nodes.
pub fn sample(potential: &dyn Profile, grid: &Grid) -> Vec<f64> {
    potential.sample(grid)
}

/// Result of fitting the short-range bound `|V(x)| ≤ C⟨x⟩^{-δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortRangeFit {
    pub fitted_c: f64,
    pub fitted_c_doubled: f64,
    pub ok: bool,
}

fn max_weighted(potential: &dyn Profile, grid: &Grid, delta: f64) -> f64 {
    (0..grid.len())
        .map(|k| {
            let x = grid.point(k);
            potential.eval(x).abs() * (1.0 + dot(x, x)).powf(0.5 * delta)
        })
        .fold(0.0, f64::max)
}

/// `max |V(x)|⟨x⟩^δ` over the lattice, repeated on the grid enlarged to `2L`
/// at equal spacing; `ok` when the two agree within 5%.
pub fn verify_short_range(potential: &dyn Profile, grid: &Grid, delta: f64) -> Result<ShortRangeFit> {
    if !(delta > 1.0) {
        return Err(Error::config(format!("decay exponent must exceed 1, got {delta}")));
    }
    let big = Grid::new(grid.dim(), grid.n() * 2, grid.half_width() * 2.0)?;
    let c1 = max_weighted(potential, grid, delta);
    let c2 = max_weighted(potential, &big, delta);
    let stable = if c1 == 0.0 { c2 == 0.0 } else { (c2 - c1).abs() <= 0.05 * c1 };
    Ok(ShortRangeFit { fitted_c: c1, fitted_c_doubled: c2, ok: c1.is_finite() && c2.is_finite() && stable })
}

/// A pair of potentials and their difference `V = V₁ - V₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialPair {
    pub v1: Potential,
    pub v2: Potential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisNorms {
    pub l2: f64,
    pub l1_s: f64,
    pub h_minus_1: f64,
}

impl HypothesisNorms {
    /// The bound `M = ‖V‖_{L²} + ‖V‖_{L¹_s}`.
    pub fn bound(&self) -> f64 {
        self.l2 + self.l1_s
    }
}

impl PotentialPair {
    pub fn new(v1: Potential, v2: Potential) -> Result<PotentialPair> {
        v1.validate()?;
        v2.validate()?;
        Ok(PotentialPair { v1, v2 })
    }

    pub fn difference(&self) -> Superposition {
        Superposition::new(vec![(1.0, self.v1.clone()), (-1.0, self.v2.clone())])
    }

    pub fn swapped(&self) -> PotentialPair {
        PotentialPair { v1: self.v2.clone(), v2: self.v1.clone() }
    }

    pub fn is_trivial(&self) -> bool {
        self.v1 == self.v2 || self.difference().is_zero()
    }

    /// Checks `‖V‖_{L²} + ‖V‖_{L¹_s} ≤ m` and returns the norms.
    pub fn check_bound(&self, grid: &Grid, s: f64, m: f64) -> Result<HypothesisNorms> {
        let norms = hypothesis_norms(self, grid, s)?;
        if norms.bound() > m {
            return Err(Error::config(format!("pair violates the bound M = {m}: measured {}", norms.bound())));
        }
        Ok(norms)
    }
}

/// `‖V‖_{L²}`, `‖V‖_{L¹_s}` and `‖V‖_{H⁻¹}` of `V = V₁ - V₂` on the lattice.
pub fn hypothesis_norms(pair: &PotentialPair, grid: &Grid, s: f64) -> Result<HypothesisNorms> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::config(format!("weight exponent s must lie in (0, 1), got {s}")));
    }
    let field = State::from_real(*grid, &pair.difference().sample(grid))?;
    Ok(HypothesisNorms {
        l2: weighted_norm(&field, NormKind::L2),
        l1_s: weighted_norm(&field, NormKind::L1Weighted(s)),
        h_minus_1: weighted_norm(&field, NormKind::SobolevNeg1),
    })
}

/// `⟨x⟩^{-δ}` helper used by decay fits.
pub fn decay_weight(x: f64, delta: f64) -> f64 {
    japanese(x).powf(-delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_examples() {
        let g = Potential::gaussian(1.0, 1.0, [0.0, 0.0]);
        assert_eq!(g.eval([0.0, 0.0]), 1.0);
        let r = Potential::rational_decay(1.0, 1.0, [0.0, 0.0], 2.0);
        assert!((r.eval([1.0, 0.0]) - 0.5).abs() < 1e-15);
        let b = Potential::compact_bump(2.0, 1.5, [0.3, 0.0]);
        assert_eq!(b.eval([0.3 + 1.5, 0.0]), 0.0);
        assert_eq!(b.eval([2.0, 1.0]), 0.0);
        assert!((b.eval([0.3, 0.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn separable_sampling_matches_pointwise() {
        let grid = Grid::new(2, 32, 5.0).unwrap();
        let p = Potential::gaussian(0.7, 1.3, [0.4, -1.1]);
        let mut fast = vec![0.0; grid.len()];
        p.sample_shifted_into(&grid, [0.25, 3.0], &mut fast);
        for (k, f) in fast.iter().enumerate() {
            let x = grid.point(k);
            assert!((f - p.eval([x[0] + 0.25, x[1] + 3.0])).abs() < 1e-15);
        }
    }

    #[test]
    fn validation() {
        assert!(Potential::rational_decay(1.0, 1.0, [0.0, 0.0], 1.0).validate().is_err());
        assert!(Potential::gaussian(1.0, 0.0, [0.0, 0.0]).validate().is_err());
        let mut g = Potential::gaussian(1.0, 1.0, [0.0, 0.0]);
        g.decay = Some(2.0);
        assert!(g.validate().is_err());
    }

    #[test]
    fn json_descriptor_round_trip_shape() {
        let p = Potential::rational_decay(0.5, 2.0, [1.0, 0.0], 1.5);
        assert_eq!(p.decay_exponent(), 1.5);
        assert_eq!(Potential::gaussian(1.0, 1.0, [0.0, 0.0]).decay_exponent(), f64::INFINITY);
    }
}
