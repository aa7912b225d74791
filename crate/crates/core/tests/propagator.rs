use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatlab_core::bump::BumpProfile;
use scatlab_core::grid::*;
use scatlab_core::potentials::{Potential, Profile};
use scatlab_core::propagator::*;
use std::f64::consts::PI;

fn gaussian_packet(g: Grid, s: f64, x0: Vec2, k0: Vec2) -> State {
    State::from_fn(g, |x| free_gaussian(x, 0.0, 2, s, x0, k0))
}

fn max_dev(a: &State, b: &State) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn free_evolution_at_zero_time_is_identity() {
    let g = Grid::new(2, 64, 8.0).unwrap();
    let u = gaussian_packet(g, 1.0, [0.5, 0.0], [1.0, 0.0]);
    assert!(free_evolve(&u, 0.0).sub(&u).unwrap().l2_norm() < 1e-13);
}

#[test]
fn free_gaussian_matches_closed_form() {
    let g = Grid::new(2, 256, 16.0).unwrap();
    let (s, x0, k0) = (1.0, [0.5, -1.0], [1.5, 0.5]);
    let u = gaussian_packet(g, s, x0, k0);
    let w = free_evolve(&u, 1.0);
    let exact = State::from_fn(g, |x| free_gaussian(x, 1.0, 2, s, x0, k0));
    let err = max_dev(&w, &exact);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn zero_potential_splitting_is_exact() {
    let g = Grid::new(2, 128, 16.0).unwrap();
    let u = make_band_limited_packet(g, [0.3, 0.2], 1.0, BumpProfile::standard()).unwrap();
    let cfg = EvolutionConfig::new(0.05).unwrap();
    let a = full_evolve(&u, 2.0, &Potential::zero(), &cfg).unwrap();
    let b = free_evolve(&u, 2.0);
    assert!(a.sub(&b).unwrap().l2_norm() < 1e-12);
}

#[test]
fn thousand_step_unitarity() {
    let g = Grid::new(2, 128, 16.0).unwrap();
    let u = make_band_limited_packet(g, [0.3, 0.2], 1.0, BumpProfile::standard()).unwrap();
    let v = Potential::gaussian(2.0, 1.0, [0.5, 0.0]);
    let w = full_evolve(&u, 10.0, &v, &EvolutionConfig::new(0.01).unwrap()).unwrap();
    assert!((w.l2_norm() - u.l2_norm()).abs() < 1e-9);
}

#[test]
fn strang_order_two() {
    let g = Grid::new(2, 128, 16.0).unwrap();
    let u = gaussian_packet(g, 1.0, [-1.0, 0.0], [0.0, 0.0]);
    let v = Potential::gaussian(1.0, 1.0, [0.0, 0.0]);
    let dt = 0.05;
    let run = |h: f64| full_evolve(&u, 1.0, &v, &EvolutionConfig::new(h).unwrap()).unwrap();
    let reference = run(dt / 8.0);
    let e1 = run(dt).sub(&reference).unwrap().l2_norm();
    let e2 = run(dt / 2.0).sub(&reference).unwrap().l2_norm();
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() <= 0.4, "ratio {ratio}");
}

#[test]
fn time_reversal() {
    let g = Grid::new(2, 128, 16.0).unwrap();
    let u = make_band_limited_packet(g, [0.3, 0.2], 1.0, BumpProfile::standard()).unwrap();
    let v = Potential::rational_decay(1.0, 1.0, [0.0, 0.5], 2.0);
    let cfg = EvolutionConfig::default();
    let back = full_evolve(&full_evolve(&u, 3.0, &v, &cfg).unwrap(), -3.0, &v, &cfg).unwrap();
    assert!(back.sub(&u).unwrap().l2_norm() < 1e-8);
}

#[test]
fn phase_rule_is_enforced() {
    let g = Grid::new(2, 128, 16.0).unwrap();
    let u = boost(
        &make_band_limited_packet(g, [0.0, 0.0], 1.0, BumpProfile::standard()).unwrap(),
        [4.0 * g.freq_spacing() * 8.0, 0.0],
    )
    .unwrap();
    let err = full_evolve(&u, 1.0, &Potential::zero(), &EvolutionConfig::new(0.05).unwrap());
    assert!(matches!(err, Err(scatlab_core::Error::Config(_))));
}

#[test]
fn boost_conjugation_examples() {
    let g = Grid::new(2, 128, 16.0).unwrap();
    let u = make_band_limited_packet(g, [0.3, 0.2], 1.0, BumpProfile::standard()).unwrap();
    assert!(boost_conjugation_check(&u, [0.0, 0.0], 0.7).unwrap() < 1e-13);
    let dk = g.freq_spacing();
    assert!(boost_conjugation_check(&u, [3.0 * dk, dk], 0.0).unwrap() < 1e-13);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let rho = [rng.random_range(-40i32..40) as f64 * dk, rng.random_range(-40i32..40) as f64 * dk];
        let dev = boost_conjugation_check(&u, rho, 0.5).unwrap();
        assert!(dev < 1e-11, "{rho:?}: {dev}");
    }
    assert!(boost_conjugation_check(&u, [0.5 * dk, 0.0], 0.5).is_err());
}

#[test]
fn conjugated_multiplication_is_translated_potential() {
    let g = Grid::new(2, 64, 8.0).unwrap();
    let u = make_band_limited_packet(g, [0.3, 0.2], 1.0, BumpProfile::standard()).unwrap();
    let v = Potential::gaussian(1.0, 1.5, [0.5, -0.5]);
    let h = g.spacing();
    let a = [5.0 * h, -3.0 * h];
    let lhs = translate(&translate(&u, a).mul_real(&v.sample(&g)).unwrap(), [-a[0], -a[1]]);
    let mut shifted = vec![0.0; g.len()];
    v.sample_shifted_into(&g, a, &mut shifted);
    let rhs = u.mul_real(&shifted).unwrap();
    assert!(max_dev(&lhs, &rhs) < 1e-12);
}

#[test]
fn cone_examples() {
    let g = Grid::new(2, 256, 64.0).unwrap();
    let u = make_band_limited_packet(g, [0.0, 0.0], 1.0, BumpProfile::standard()).unwrap();
    let times = [4.0, 8.0, 12.0, 16.0, 24.0];
    let table = cone_decay_diagnostic(&u, 1.5, &times).unwrap();
    assert!(!table.boundary_flag);
    assert!(table.rows.windows(2).all(|w| w[1].fraction < w[0].fraction));
    assert!(table.slope <= -3.0, "{}", table.slope);
    let empty = cone_decay_diagnostic(&u, 1e3, &[1.0]).unwrap();
    assert_eq!(empty.rows[0].fraction, 0.0);

    // frequencies near ξ₀ = (6, 0) travel to x ≈ 5ξ₀; the mirror ball stays empty
    let g = Grid::new(2, 512, 64.0).unwrap();
    let v = make_band_limited_packet(g, [6.0, 0.0], 1.0, BumpProfile::standard()).unwrap();
    let w = free_evolve(&v, 5.0);
    let mirror = region_mass_fraction(&w, |x| norm2([x[0] + 30.0, x[1]]) < 5.0);
    assert!(mirror < 1e-6, "{mirror}");
    assert!(region_mass_fraction(&w, |x| norm2([x[0] - 30.0, x[1]]) < 5.0) > 0.5);
}

#[test]
fn overlap_routes_agree() {
    let g = Grid::new(2, 512, 64.0).unwrap();
    let u = make_band_limited_packet(g, [0.0, 0.0], 1.0, BumpProfile::standard()).unwrap();
    // |ρ| ≈ 10 on the dual lattice, so the lab-frame boost is periodic
    let rho = (10.0 / g.freq_spacing()).round() * g.freq_spacing();
    let b = Boost::new(rho * rho, [1.0, 0.0]).unwrap();
    for v in [Potential::gaussian(0.5, 2.0, [0.0, 0.0]), Potential::rational_decay(0.5, 1.0, [0.3, 0.0], 2.0)] {
        let t = overlap_decay_diagnostic(&v, &u, &b, &[0.1, 0.25, 0.5, 1.0]).unwrap();
        assert!(t.rows.iter().all(|r| r.lab.is_some()));
        assert!(t.max_route_gap < 1e-10, "{}", t.max_route_gap);
    }
    let z = overlap_decay_diagnostic(&Potential::zero(), &u, &b, &[0.5, 1.0]).unwrap();
    assert!(z.rows.iter().all(|r| r.translated == 0.0 && r.lab == Some(0.0)));
}

#[test]
fn overlap_decay_rate_for_rational_potential() {
    let g = Grid::new(2, 256, 64.0).unwrap();
    let u = make_band_limited_packet(g, [0.0, 0.0], 1.0, BumpProfile::standard()).unwrap();
    let b = Boost::new(100.0, [1.0, 0.0]).unwrap();
    let v = Potential::rational_decay(1.0, 1.0, [0.0, 0.0], 2.0);
    let times = [0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 20.0];
    let t = overlap_decay_diagnostic(&v, &u, &b, &times).unwrap();
    assert!(t.slope <= -1.7, "{}", t.slope);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn free_evolution_group_and_unitarity(seed in 0u64..1000, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = State::new(g, (0..g.len()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()).unwrap();
        let a = free_evolve(&free_evolve(&u, s), t);
        let b = free_evolve(&u, s + t);
        prop_assert!(a.sub(&b).unwrap().l2_norm() < 1e-12 * u.l2_norm());
        prop_assert!((free_evolve(&u, t).l2_norm() - u.l2_norm()).abs() < 1e-12 * u.l2_norm());
    }
}

#[test]
fn free_gaussian_half_plane_mass() {
    // |u(x,t)|² ∝ exp(-|x - k₀t|²/σ²) with σ² = (s⁴ + t²)/s², so the mass in
    // {x₁ > c} is erfc((c - k₀t)/σ)/2
    let g = Grid::new(2, 256, 32.0).unwrap();
    let (s, k0, t) = (1.5, [1.0, 0.0], 3.0);
    let w = free_evolve(&gaussian_packet(g, s, [0.0, 0.0], k0), t);
    let sigma = ((s.powi(4) + t * t) / (s * s)).sqrt();
    // edges halfway between nodes make the lattice sum a midpoint rule, whose
    // leading error is h²/24 times the marginal density slope at the edge
    let h = g.spacing();
    let mu = k0[0] * t;
    for c in [-0.875, 3.125, 5.625] {
        let exact = 0.5 * statrs::function::erf::erfc((c - mu) / sigma);
        let density = (-(c - mu).powi(2) / (sigma * sigma)).exp() / (sigma * PI.sqrt());
        let slope = -2.0 * (c - mu) / (sigma * sigma) * density;
        let got = region_mass_fraction(&w, |x| x[0] > c);
        assert!((got - exact - h * h / 24.0 * slope).abs() < 1e-6, "{c}: {got} {exact}");
    }
}
