use num_complex::Complex64;
use scatlab_core::bump::BumpProfile;
use scatlab_core::experiments::xray_pairing_oracle;
use scatlab_core::grid::*;
use scatlab_core::potentials::{sample, Potential, PotentialPair};
use scatlab_core::reconstruct::*;
use scatlab_core::scattering::ScatteringConfig;
use scatlab_core::xray::{xray_forward, SliceGrid};
use scatlab_core::Error;
use std::f64::consts::PI;

fn gaussian_pair(amplitude: f64) -> PotentialPair {
    PotentialPair::new(Potential::gaussian(amplitude, 2.0, [0.0, 0.0]), Potential::zero()).unwrap()
}

fn sim_grid() -> Grid {
    ReconstructionConfig::default().simulation.build().unwrap()
}

/// `∫ g(s) ds` by the trapezoid rule on `[a, b]`.
fn quad(g: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    (0..=m).map(|k| g(a + k as f64 * h) * if k == 0 || k == m { 0.5 } else { 1.0 }).sum::<f64>() * h
}

#[test]
fn separable_packet_factorizes() {
    let g = Grid::new(2, 128, 32.0).unwrap();
    let probe = ProbeConfig::default();
    let omega = [0.6, 0.8];
    let phi = probe.phi_h();
    let u = separable_packet(&probe.theta, &phi, omega, g).unwrap();
    let spec = fft_forward(&u);
    let perp = rot90(omega);
    let dev = (0..spec.grid().len())
        .map(|k| {
            let xi = spec.grid().point(k);
            (spec.values()[k] - probe.theta.eval(dot(xi, omega)) * phi(dot(xi, perp))).norm()
        })
        .fold(0.0, f64::max);
    assert!(dev < 1e-12, "{dev}");
    let wide = Theta { half_width: 0.6, sharpness: 8.0 };
    assert!(separable_packet(&wide, &phi, omega, g).is_err());
}

#[test]
fn separable_packet_sobolev_product_bound() {
    let g = Grid::new(2, 256, 64.0).unwrap();
    let probe = ProbeConfig::default();
    let phi = probe.phi_h();
    let u = separable_packet(&probe.theta, &phi, [1.0, 0.0], g).unwrap();
    let th = probe.theta;
    // the same frequency nodes on a line, so both sides are lattice sums
    let line = Grid::new(1, 256, 64.0).unwrap().dual();
    let nodes: Vec<f64> = (0..line.len()).map(|k| line.point(k)[0]).collect();
    let dxi = nodes[1] - nodes[0];
    let lattice = |f: &dyn Fn(f64) -> f64, s: f64| -> f64 {
        (nodes.iter().map(|&x| (1.0 + x * x).powf(s) * f(x).powi(2)).sum::<f64>() * dxi).sqrt()
    };
    for s in [0.0, 1.0, 2.0] {
        let a = lattice(&|x| th.eval(x), s);
        let b = lattice(&phi, s);
        let lhs = weighted_norm(&u, NormKind::Sobolev(s));
        if s == 0.0 {
            assert!((lhs - a * b).abs() < 1e-12 * a * b, "{lhs} vs {}", a * b);
        }
        assert!(lhs <= a * b * (1.0 + 1e-12), "s={s}: {lhs} > {}", a * b);
    }
}

#[test]
fn axis_aligned_packet_is_product_of_line_transforms() {
    let g = Grid::new(2, 128, 32.0).unwrap();
    let line = Grid::new(1, 128, 32.0).unwrap();
    let probe = ProbeConfig::default();
    let phi = probe.phi_h();
    let u = separable_packet(&probe.theta, &phi, [1.0, 0.0], g).unwrap();
    // ω = (1, 0) puts θ on the first frequency axis and φ on the second
    let perp = rot90([1.0, 0.0]);
    assert!(perp[0].abs() < 1e-15 && perp[1] > 0.0);
    let a = from_spectrum(line, |xi| Complex64::new(probe.theta.eval(xi[0]), 0.0));
    let b = from_spectrum(line, |xi| Complex64::new(phi(xi[0]), 0.0));
    let n = g.n();
    let dev = (0..g.len())
        .map(|k| {
            let [i, j] = g.unflatten(k);
            (u.values()[k] - a.values()[i] * b.values()[j]).norm()
        })
        .fold(0.0, f64::max);
    assert!(dev < 1e-12, "{dev}");
    assert_eq!(a.values().len(), n);
}

#[test]
fn mollifier_mass_support_and_scaling() {
    let g = Grid::new(2, 512, 128.0).unwrap();
    let psi0 = BumpProfile::new(8.0);
    let center = [0.4, -0.3];
    let mut norms = Vec::new();
    for eps in [0.4, 0.2, 0.1] {
        let m = mollifier_packet(center, eps, psi0, g).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-12);
        let spec = m.spectrum();
        for (k, v) in spec.values().iter().enumerate() {
            let xi = spec.grid().point(k);
            if norm2([xi[0] - center[0], xi[1] - center[1]]) >= eps {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
        assert!(scatlab_core::propagator::spectral_mass_outside(&m.state, center, eps) < 1e-14);
        norms.push(m.state.l2_norm_sq());
    }
    for w in norms.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio - 4.0).abs() <= 0.08, "{ratio}");
    }
    assert!(matches!(mollifier_packet([0.0, 0.0], 0.01, psi0, g), Err(Error::Resolution(_))));
    assert!(matches!(mollifier_packet([12.5, 0.0], 0.2, psi0, g), Err(Error::Nyquist { .. })));
}

#[test]
fn transfer_mass_depends_only_on_the_along_component() {
    let g = sim_grid();
    let probe = ProbeConfig::default();
    let psi0 = BumpProfile::new(probe.psi0_sharpness);
    let omega = [1.0, 0.0];
    let dk = g.freq_spacing();
    let c0 = transfer_mass(&probe.theta, omega, &mollifier_packet([0.0, 0.0], 0.5, psi0, g).unwrap());
    let c1 = transfer_mass(&probe.theta, omega, &mollifier_packet([0.0, 20.0 * dk], 0.5, psi0, g).unwrap());
    assert!(c0 > 0.0 && c0 <= 1.0);
    assert!((c0 - c1).abs() < 1e-13);
}

#[test]
fn trivial_and_swapped_pairs() {
    let g = Grid::new(2, 128, 48.0).unwrap();
    let probe = ProbeConfig::default().with_lambda(25.0);
    let cfg = ScatteringConfig::default();
    let omega = [0.0, 1.0];
    let boost = Boost::for_probe(25.0, omega).unwrap();
    let phi = probe_packet(&probe, omega, g).unwrap();
    let psi = mollifier_packet([0.5, 0.0], 0.5, BumpProfile::new(8.0), g).unwrap().state;

    let v = Potential::gaussian(0.5, 2.0, [0.0, 0.0]);
    let same = PotentialPair::new(v.clone(), v.clone()).unwrap();
    assert_eq!(pairing_xray_estimate(&same, &boost, &phi, &psi, &cfg).unwrap().value, Complex64::new(0.0, 0.0));
    let s = slice_estimate(&same, omega, &[0.0, 0.5], &probe, g, &cfg).unwrap();
    assert!(s.samples.iter().all(|x| x.value == Complex64::new(0.0, 0.0)));

    let pair = PotentialPair::new(v, Potential::gaussian(0.3, 1.5, [1.0, 0.0])).unwrap();
    let a = pairing_xray_estimate(&pair, &boost, &phi, &psi, &cfg).unwrap();
    let b = pairing_xray_estimate(&pair.swapped(), &boost, &phi, &psi, &cfg).unwrap();
    assert!(a.value.norm() > 0.0);
    assert!((a.value + b.value).norm() < 1e-10 * a.value.norm());
    let sa = slice_estimate(&pair, omega, &[0.5], &probe, g, &cfg).unwrap();
    let sb = slice_estimate(&pair.swapped(), omega, &[0.5], &probe, g, &cfg).unwrap();
    assert!((sa.samples[0].value + sb.samples[0].value).norm() < 1e-10 * sa.samples[0].value.norm());
}

#[test]
fn point_estimate_at_zero_frequency_matches_xray_oracle() {
    let g = sim_grid();
    let probe = ProbeConfig::default();
    let cfg = ScatteringConfig::default();
    let pair = gaussian_pair(0.5);
    let omega = [1.0, 0.0];
    let phi = probe_packet(&probe, omega, g).unwrap();
    let applied = apply_difference(&pair, &Boost::for_probe(probe.lambda, omega).unwrap(), &phi, &cfg).unwrap();
    assert!(applied.converged && applied.boundary_ok);
    let est = fourier_point_estimate(&applied, [0.0, 0.0], &probe).unwrap();
    let m = mollifier_packet([0.0, 0.0], probe.epsilon(), BumpProfile::new(probe.psi0_sharpness), g).unwrap();
    let oracle = xray_pairing_oracle(&pair, omega, &phi, &m.state).unwrap();
    let rel = (est - oracle).norm() / oracle.norm();
    println!("point estimate {est} oracle {oracle} rel {rel:.3e}");
    assert!(rel < 0.05);
}

#[test]
fn slice_estimate_against_transform_and_convolution_oracles() {
    let g = sim_grid();
    let probe = ProbeConfig::default();
    let cfg = ScatteringConfig::default();
    let pair = gaussian_pair(0.5);
    let omega = [1.0, 0.0];
    let est = slice_estimate(&pair, omega, &[0.0, 1.0], &probe, g, &cfg).unwrap();
    assert!(est.converged && est.boundary_ok);

    // √(2π)F(V)(0) from the FFT of the sampled potential
    let og = Grid::new(2, 64, 16.0).unwrap();
    let spec = fft_forward(&State::from_real(og, &sample(&pair.difference(), &og)).unwrap());
    let at_zero = spec.values()[spec.grid().nearest_index([0.0, 0.0])].re * (2.0 * PI).sqrt();
    let got0 = est.samples[0].value.re;
    println!("eta=0: estimate {got0} fft oracle {at_zero}");
    assert!((got0 - at_zero).abs() < 0.1 * at_zero);

    // (F_{ω⊥}f * φ_h)(η) with f from the forward X-ray transform
    let slice = SliceGrid::new(omega, 512, 32.0).unwrap();
    let f = xray_forward(&pair.difference(), &slice, 0.05).unwrap();
    let ys = slice.coords();
    let dy = ys[1] - ys[0];
    let slice_ft = |eta: f64| -> f64 {
        ys.iter().zip(&f.values).map(|(y, v)| v * (eta * y).cos()).sum::<f64>() * dy / (2.0 * PI).sqrt()
    };
    let phi = probe.phi_h();
    let h = probe.h();
    for sample in &est.samples {
        let conv = quad(|z| slice_ft(sample.eta - z) * phi(z), -0.5 * h, 0.5 * h, 400);
        let rel = (sample.value.re - conv).abs() / conv.abs();
        println!("eta={}: estimate {} convolution oracle {conv} rel {rel:.3e}", sample.eta, sample.value);
        assert!(rel < 0.05);
        assert!(sample.value.im.abs() < 0.05 * conv.abs());
    }
}

#[test]
fn slice_estimates_are_linear_at_born_scale() {
    let g = sim_grid();
    let probe = ProbeConfig::default().with_lambda(100.0);
    let cfg = ScatteringConfig::default();
    let omega = [0.0, 1.0];
    let a = slice_estimate(&gaussian_pair(0.05), omega, &[0.5], &probe, g, &cfg).unwrap();
    let b = slice_estimate(&gaussian_pair(0.025), omega, &[0.5], &probe, g, &cfg).unwrap();
    let ratio = a.samples[0].value.norm() / b.samples[0].value.norm();
    assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
}

fn small_recon() -> ReconstructionConfig {
    ReconstructionConfig {
        cutoff: 1.0,
        simulation: GridSpec { dim: 2, n: 128, half_width: 48.0 },
        output: GridSpec { dim: 2, n: 16, half_width: 8.0 },
    }
}

#[test]
fn assembly_and_inversion_on_a_small_lattice() {
    let probe = ProbeConfig::default().with_lambda(25.0);
    let cfg = ScatteringConfig::default();
    let recon = small_recon();
    let pair = gaussian_pair(0.5);
    let field = assemble_fourier(&pair, &recon, &probe, &cfg).unwrap();
    assert_eq!(field.missing, 0);
    let out = recon.output.build().unwrap();
    let dual = out.dual();
    let inside = (0..dual.len()).filter(|&k| norm2(dual.point(k)) <= 1.0).count();
    assert_eq!(field.nodes, inside);
    for k in 0..dual.len() {
        let xi = dual.point(k);
        match field.values[k] {
            Some(v) => {
                assert!(norm2(xi) <= 1.0 + 1e-12);
                // Hermitian partner, when it lies on the lattice
                if xi.iter().all(|c| c.abs() < dual.half_width() - 1e-9) {
                    let m = field.values[dual.nearest_index([-xi[0], -xi[1]])].unwrap();
                    assert_eq!(m, v.conj());
                }
            }
            None => assert!(norm2(xi) > 1.0),
        }
    }
    let (v_rec, report) = invert_and_report(&field, &pair).unwrap();
    assert_eq!(v_rec.len(), out.len());
    assert!(report.h_minus_1_error >= report.high_band_error * (1.0 - 1e-12));
    assert!(report.h_minus_1_error < report.true_h_minus_1);

    let same = PotentialPair::new(pair.v1.clone(), pair.v1.clone()).unwrap();
    let z = assemble_fourier(&same, &recon, &probe, &cfg).unwrap();
    assert!(z.values.iter().flatten().all(|v| *v == Complex64::new(0.0, 0.0)));
    let (zr, zrep) = invert_and_report(&z, &same).unwrap();
    assert!(zr.iter().all(|&v| v == 0.0));
    assert_eq!(zrep.h_minus_1_error, 0.0);
}

#[test]
fn assembly_fails_when_nodes_are_missing() {
    let probe = ProbeConfig::default().with_lambda(25.0);
    let cfg = ScatteringConfig { horizon: Some(0.05), max_doublings: 0, ..Default::default() };
    assert!(matches!(assemble_fourier(&gaussian_pair(0.5), &small_recon(), &probe, &cfg), Err(Error::Assembly(_))));
}

#[test]
fn probe_config_validation() {
    assert!(ProbeConfig::default().validate().is_ok());
    assert!(ProbeConfig::default().with_lambda(16.0).validate().is_err());
    assert!(ProbeConfig { epsilon: Some(1.2), ..Default::default() }.validate().is_err());
    let p = ProbeConfig::default();
    assert!((p.epsilon() - 400f64.powf(-0.125)).abs() < 1e-15);
    assert!((p.h() - p.epsilon().sqrt()).abs() < 1e-15);
    let recon = ReconstructionConfig { cutoff: 20.0, ..Default::default() };
    assert!(recon.validate(&p).is_err());
}
