//! Quick invariant checks, one block per module, on small grids.

use crate::config::RunConfig;
use crate::exit;
use num_complex::Complex64;
use scatlab_core::bump::BumpProfile;
use scatlab_core::experiments::{scaled_family, stability_sweep, StabilityConfig};
use scatlab_core::grid::{fft_forward, fft_inverse, make_band_limited_packet, Boost, Grid, State};
use scatlab_core::potentials::{verify_short_range, Potential, PotentialPair, Superposition};
use scatlab_core::propagator::{free_evolve, full_evolve, EvolutionConfig};
use scatlab_core::reconstruct::{mollifier_packet, pairing_xray_estimate};
use scatlab_core::scattering::{scattering_apply_moving, ScatteringConfig};
use scatlab_core::xray::xray_at;

pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    /// Measured deviation (or 0/1 for yes/no checks).
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

fn or_fail<T>(r: scatlab_core::Result<T>, f: impl FnOnce(T) -> f64) -> f64 {
    r.map(f).unwrap_or(f64::NAN)
}

/// All checks; each one is cheap enough for a smoke run.
pub fn checks() -> Vec<Check> {
    let g = Grid::new(2, 64, 16.0).expect("grid");
    let packet = make_band_limited_packet(g, [0.0, 0.0], 1.0, BumpProfile::standard()).expect("packet");
    let lumpy =
        State::from_fn(g, |x| Complex64::new((-0.1 * (x[0] * x[0] + x[1] * x[1])).exp(), 0.3 * (0.2 * x[0]).sin()));
    let gauss = Potential::gaussian(0.5, 2.0, [0.0, 0.0]);
    let scat = ScatteringConfig::default();
    let mut out = Vec::new();

    let spec = fft_forward(&lumpy);
    out.push(Check {
        module: "grid",
        name: "fft round trip",
        value: fft_inverse(&spec).sub(&lumpy).map(|d| d.l2_norm() / lumpy.l2_norm()).unwrap_or(f64::NAN),
        tolerance: 1e-12,
    });
    out.push(Check {
        module: "grid",
        name: "Parseval",
        value: (spec.l2_norm() - lumpy.l2_norm()).abs() / lumpy.l2_norm(),
        tolerance: 1e-10,
    });

    out.push(Check {
        module: "potentials",
        name: "Gaussian passes the short-range fit",
        value: or_fail(verify_short_range(&gauss, &g, 2.0), |f| flag(f.ok)),
        tolerance: 0.0,
    });
    out.push(Check {
        module: "potentials",
        name: "identical pair is trivial",
        value: or_fail(PotentialPair::new(gauss.clone(), gauss.clone()), |p| flag(p.is_trivial())),
        tolerance: 0.0,
    });

    let cfg = EvolutionConfig { dt: 0.05 };
    out.push(Check {
        module: "propagator",
        name: "zero potential splitting is exact",
        value: or_fail(full_evolve(&packet, 2.0, &Potential::zero(), &cfg), |u| {
            u.sub(&free_evolve(&packet, 2.0)).map(|d| d.l2_norm()).unwrap_or(f64::NAN)
        }),
        tolerance: 1e-12,
    });
    out.push(Check {
        module: "propagator",
        name: "unitarity drift",
        value: or_fail(full_evolve(&packet, 5.0, &gauss, &cfg), |u| (u.l2_norm() - packet.l2_norm()).abs()),
        tolerance: 1e-9,
    });

    let boost = Boost::for_probe(25.0, [1.0, 0.0]).expect("boost");
    out.push(Check {
        module: "scattering",
        name: "zero potential gives the identity",
        value: or_fail(scattering_apply_moving(&Potential::zero(), &packet, boost.rho(), &scat), |s| {
            s.state.sub(&packet).map(|d| d.l2_norm()).unwrap_or(f64::NAN)
        }),
        tolerance: 1e-10,
    });
    out.push(Check {
        module: "scattering",
        name: "scattering operator is unitary",
        value: or_fail(scattering_apply_moving(&gauss, &packet, boost.rho(), &scat), |s| {
            (s.state.l2_norm() - packet.l2_norm()).abs()
        }),
        tolerance: 1e-8,
    });

    let sup = Superposition::from(gauss.clone());
    let closed = 0.5 * 2.0 * std::f64::consts::PI.sqrt() * (-(1.5f64 * 1.5) / 4.0).exp();
    out.push(Check {
        module: "xray",
        name: "Gaussian line integral closed form",
        value: or_fail(xray_at(&sup, [0.6, 0.8], [-1.2, 0.9], 0.05), |v| (v - closed).abs() / closed),
        tolerance: 1e-8,
    });

    let same = PotentialPair::new(gauss.clone(), gauss.clone()).expect("pair");
    out.push(Check {
        module: "reconstruct",
        name: "identical pair pairs to zero",
        value: or_fail(pairing_xray_estimate(&same, &boost, &packet, &packet, &scat), |r| r.value.norm()),
        tolerance: 1e-14,
    });
    let fine = Grid::new(2, 64, 32.0).expect("grid");
    out.push(Check {
        module: "reconstruct",
        name: "mollifier has unit mass",
        value: or_fail(mollifier_packet([0.3, 0.0], 0.5, BumpProfile::standard(), fine), |m| (m.mass - 1.0).abs()),
        tolerance: 1e-12,
    });

    let short = scaled_family(&gauss, &[0.5, 0.6]).expect("family");
    out.push(Check {
        module: "experiments",
        name: "sweep with too few pairs is refused",
        value: flag(matches!(
            stability_sweep(&short, &StabilityConfig::default(), &scat),
            Err(scatlab_core::Error::Design(_))
        )),
        tolerance: 0.0,
    });

    let text = serde_json::to_string(&RunConfig::default()).unwrap_or_default();
    out.push(Check {
        module: "cli",
        name: "default config round-trips through JSON",
        value: flag(RunConfig::from_json(&text).map(|c| c == RunConfig::default()).unwrap_or(false)),
        tolerance: 0.0,
    });
    out.push(Check {
        module: "cli",
        name: "unknown config keys are rejected",
        value: flag(RunConfig::from_json(r#"{"seeed": 3}"#).is_err()),
        tolerance: 0.0,
    });
    out
}

/// Prints the summary table; exit code 0 when every check passes.
pub fn run_selftest() -> i32 {
    let checks = checks();
    println!("{:<12} {:<42} {:>11} {:>9}  result", "module", "check", "value", "tol");
    let mut failures = 0;
    for c in &checks {
        let ok = c.passed();
        failures += usize::from(!ok);
        println!(
            "{:<12} {:<42} {:>11.3e} {:>9.1e}  {}",
            c.module,
            c.name,
            c.value,
            c.tolerance,
            if ok { "pass" } else { "FAIL" }
        );
    }
    println!("{} checks, {failures} failed", checks.len());
    if failures == 0 {
        exit::OK
    } else {
        exit::INTERNAL
    }
}
