//! Smooth compactly supported profiles.

use serde::{Deserialize, Serialize};

/// `b(r) = exp(-a r^2 / (1 - r^2))` for `|r| < 1`, zero otherwise.
///
/// `b(0) = 1` exactly. With `a = 1` this is the standard bump
/// `exp(1 - 1/(1 - r^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpProfile {
    pub sharpness: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        BumpProfile { sharpness: 1.0 }
    }
}

impl BumpProfile {
    pub fn new(sharpness: f64) -> Self {
        BumpProfile { sharpness }
    }

    pub fn standard() -> Self {
        Self::default()
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let r2 = r * r;
        if r2 >= 1.0 {
            0.0
        } else {
            (-self.sharpness * r2 / (1.0 - r2)).exp()
        }
    }

    /// `int_{-1}^{1} b(|s|) ds`, by a fine trapezoid (the integrand is flat at the ends).
    pub fn integral_1d(&self) -> f64 {
        let m = 20_000;
        let h = 2.0 / m as f64;
        (1..m).map(|k| self.eval(-1.0 + k as f64 * h)).sum::<f64>() * h
    }

    /// `int_{|r|<1} b(|r|) dr` over the unit disk.
    pub fn integral_2d(&self) -> f64 {
        let m = 20_000;
        let h = 1.0 / m as f64;
        (1..m)
            .map(|k| {
                let r = k as f64 * h;
                self.eval(r) * r
            })
            .sum::<f64>()
            * h
            * std::f64::consts::TAU
    }

    /// `int_{-1}^{1} |s|^p b(|s|) ds`.
    pub fn moment_1d(&self, p: f64) -> f64 {
        let m = 20_000;
        let h = 2.0 / m as f64;
        (1..m)
            .map(|k| {
                let s = -1.0 + k as f64 * h;
                s.abs().powf(p) * self.eval(s)
            })
            .sum::<f64>()
            * h
    }
}
