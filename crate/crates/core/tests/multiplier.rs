use landis_core::multiplier::{
    build_multiplier, check_subsolution, grad_log, interior_gradient_ratio, lipschitz_constant, morrey_check,
    normalize_at, operator_residual, BuildOptions, Multiplier,
};
use landis_core::order::log_log_slope;
use landis_core::potential::{zero_drift, PotentialPair};
use landis_core::{GridSpec, ScalarField, C64};
use proptest::prelude::*;

fn b2(n: usize) -> std::sync::Arc<landis_core::Grid> {
    GridSpec::disc(2.0, n).unwrap().build()
}

fn interior_min(f: &ScalarField) -> f64 {
    (0..f.len()).filter(|&k| f.is_valid(k)).map(|k| f.get(k)).fold(f64::INFINITY, f64::min)
}

#[test]
fn exact_solution_is_a_zero_residual_subsolution() {
    let p = PotentialPair::constant(b2(64), 4.0, (0.0, 0.0), 4.0, 1.0).unwrap();
    let res = check_subsolution(2.0, &p).unwrap();
    assert!(res.sup() < 1e-9 * (4.0f64).exp());
}

#[test]
fn free_subsolution_residual_is_exp_x() {
    let p = PotentialPair::constant(b2(64), 0.0, (0.0, 0.0), 1.0, 1.0).unwrap();
    let res = check_subsolution(1.0, &p).unwrap();
    let err = res.map_with_point(|z, v| (v - z.re.exp()) / z.re.exp()).sup();
    assert!(err < 1e-12);
    assert!(interior_min(&res) > 0.0);
}

#[test]
fn random_subsolution_is_nonnegative() {
    for seed in 0..5 {
        let p = PotentialPair::random(b2(64), 9.0, 2.0, 2.0, seed).unwrap();
        let res = check_subsolution(p.lambda(), &p).unwrap();
        assert!(interior_min(&res) >= -1e-10, "seed {seed}");
    }
}

#[test]
fn free_multiplier_is_the_boundary_constant() {
    let p = PotentialPair::constant(b2(64), 0.0, (0.0, 0.0), 1.0, 1.0).unwrap();
    let opts = BuildOptions::default();
    let m = build_multiplier(&p, opts).unwrap();
    let e4 = 4f64.exp();
    let h = p.grid().h();
    let err = m.phi.map(|v| (v - e4) / e4).sup();
    // Stopping on the increment leaves an error of order tol/(1 − ρ) ~ tol/h².
    assert!(err < 10.0 * opts.tol / (h * h), "{err}");
}

fn sandwich(m: &Multiplier) -> (f64, f64) {
    let lam = m.lambda();
    let lo = m.phi.values().iter().copied().fold(f64::INFINITY, f64::min) / (-2.0 * lam).exp();
    let hi = m.phi.values().iter().copied().fold(0.0, f64::max) / (2.0 * lam).exp();
    (lo, hi)
}

#[test]
fn unit_potential_multiplier_obeys_bounds_and_pde() {
    let g = b2(96);
    let p = PotentialPair::constant(g.clone(), 1.0, (0.0, 0.0), 1.0, 1.0).unwrap();
    let opts = BuildOptions::default();
    let m = build_multiplier(&p, opts).unwrap();
    let (lo, hi) = sandwich(&m);
    assert!(lo >= 1.0 && hi <= 1.0 + 1e-12);
    let res = operator_residual(&p, &m.phi).unwrap().sup() / (2.0 * m.lambda()).exp();
    assert!(res <= 10.0 * opts.tol / (g.h() * g.h()), "{res}");
}

#[test]
fn half_plane_multiplier_is_monotone() {
    let p = PotentialPair::half_plane(b2(96), 4.0, 1.0).unwrap();
    let m = build_multiplier(&p, BuildOptions::default()).unwrap();
    let (lo, hi) = sandwich(&m);
    assert!(lo >= 1.0 && hi <= 1.0 + 1e-12);
    let rep = m.report.unwrap();
    assert_eq!(rep.monotone_violations, 0);
    assert!(rep.max_over_super <= 1.0 + 1e-12);
}

#[test]
fn negative_potential_is_rejected() {
    let g = b2(32);
    let v = ScalarField::constant(g.clone(), -1e-6);
    assert!(PotentialPair::new(v, zero_drift(&g), 1.0, 1.0).is_err());
    let v = ScalarField::constant(g.clone(), -1e-13);
    let p = PotentialPair::new(v, zero_drift(&g), 1.0, 1.0).unwrap();
    assert_eq!(p.v.sup(), 0.0);
}

#[test]
fn nonconvergence_is_an_error() {
    let p = PotentialPair::constant(b2(64), 1.0, (0.0, 0.0), 1.0, 1.0).unwrap();
    assert!(build_multiplier(&p, BuildOptions { tol: 1e-14, max_sweeps: 3 }).is_err());
}

#[test]
fn gradient_of_log_examples() {
    let g = b2(64);
    let m = Multiplier::from_phi(ScalarField::constant(g.clone(), 7.0), 1.0, 1.0).unwrap();
    let (gx, gy) = grad_log(&m);
    assert!(gx.sup() < 1e-14 && gy.sup() < 1e-14);
    let m = Multiplier::from_phi(ScalarField::from_fn(g, |z| (3.0 * z.re).exp()).unwrap(), 9.0, 1.0).unwrap();
    let l = lipschitz_constant(&m, 1.4).unwrap();
    assert!((l - 3.0).abs() < 1e-9);
    assert!(lipschitz_constant(&m, 1.5).is_err());
}

#[test]
fn log_gradient_tracks_sqrt_m() {
    let g = b2(128);
    let mut xs = vec![];
    let mut ys = vec![];
    for m in [1.0f64, 4.0, 16.0, 64.0] {
        for seed in 0..3 {
            let p = PotentialPair::random(g.clone(), m, 1.0, 0.0, seed).unwrap();
            let mm = build_multiplier(&p, BuildOptions::default()).unwrap();
            xs.push(m.sqrt());
            ys.push(lipschitz_constant(&mm, 1.4).unwrap());
        }
    }
    // Small M sits in the linear-response regime |∇ψ| ~ M, so the full sweep
    // overshoots; the asymptotic part must be linear in √M.
    let full = log_log_slope(&xs, &ys);
    let tail = log_log_slope(&xs[3..], &ys[3..]);
    assert!((0.7..=1.3).contains(&tail), "tail slope {tail}");
    assert!(full < 1.5, "full slope {full}");
}

#[test]
fn morrey_examples() {
    let g = b2(128);
    let zero = Multiplier::from_psi(ScalarField::constant(g.clone(), 0.0), 1.0, 1.0);
    assert_eq!(morrey_check(&zero, C64::new(0.3, 0.0), 0.1, 10.0).unwrap(), 0.0);
    let m = 4.0f64;
    let lin = Multiplier::from_psi(ScalarField::from_fn(g.clone(), |z| m.sqrt() * z.re).unwrap(), m, 1.0);
    // |∇ψ|² = M with K folded into M + K² = 5.
    let c = 10.0;
    for r in [0.08, 0.12, 0.19] {
        let v = morrey_check(&lin, C64::new(0.2, -0.4), r, c).unwrap();
        let exact = std::f64::consts::PI * m / (c * c * (m + 1.0));
        assert!((v - exact).abs() < 0.1 * exact, "r {r}: {v} vs {exact}");
    }
    assert!(morrey_check(&lin, C64::new(1.5, 0.0), 0.1, c).is_err());
    assert!(morrey_check(&lin, C64::new(0.0, 0.0), 0.3, c).is_err());
}

#[test]
fn morrey_ratio_is_bounded_on_a_built_multiplier() {
    use rand::{Rng, SeedableRng};
    let p = PotentialPair::random(b2(128), 16.0, 1.0, 1.0, 7).unwrap();
    let m = build_multiplier(&p, BuildOptions::default()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let c = 2.0;
    let vals: Vec<f64> = (0..20)
        .map(|_| {
            let z = C64::from_polar(rng.gen_range(0.0..1.2), rng.gen_range(0.0..std::f64::consts::TAU));
            let r = rng.gen_range(0.11..0.19);
            morrey_check(&m, z, r, c).unwrap()
        })
        .collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(lo > 0.0 && hi / lo <= 50.0, "{lo} {hi}");
}

#[test]
fn normalization_examples() {
    let g = b2(64);
    let m = Multiplier::from_phi(ScalarField::constant(g.clone(), 4f64.exp()), 1.0, 1.0).unwrap();
    let (n, _) = normalize_at(&m, C64::new(0.0, 0.0), 1.0).unwrap();
    assert!(n.phi.map(|v| v - 1.0).sup() < 1e-12);
    assert_eq!(n.normalization_point, Some(C64::new(0.0, 0.0)));

    let m = Multiplier::from_phi(ScalarField::from_fn(g.clone(), |z| (2.0 * z.re).exp()).unwrap(), 4.0, 1.0).unwrap();
    let (n, _) = normalize_at(&m, C64::new(0.5, 0.0), 1.0).unwrap();
    let err = n.phi.map_with_point(|z, v| v / (2.0 * (z.re - 0.5)).exp() - 1.0).sup();
    assert!(err < 1e-12);
    assert!(normalize_at(&m, C64::new(1.5, 0.0), 1.0).is_err());
}

#[test]
fn normalized_multiplier_is_flat_near_the_point() {
    let p = PotentialPair::random(b2(128), 16.0, 1.0, 1.0, 3).unwrap();
    let m = build_multiplier(&p, BuildOptions::default()).unwrap();
    let c = 0.1;
    let (n, chk) = normalize_at(&m, C64::new(-0.5, 0.2), c).unwrap();
    let h = m.phi.grid().h();
    let allowed = (2.0 * chk.radius * chk.lipschitz).exp() * (1.0 + h);
    assert!(chk.max_phi / chk.min_phi <= allowed);
    assert!(chk.min_phi >= 1.0 / chk.c2 && chk.max_phi <= chk.c2);
    // ψ shifts by a constant, so ∇ψ is unchanged.
    let (a, _) = grad_log(&m);
    let (b, _) = grad_log(&n);
    assert!(a.zip_with(&b, |x, y| (x - y).abs()).unwrap().sup() < 1e-9);
}

#[test]
fn interior_gradient_constant_is_stable() {
    let g = b2(128);
    let vals: Vec<f64> = (0..6)
        .map(|seed| {
            let p = PotentialPair::random(g.clone(), 16.0, 2.0, 2.0, seed).unwrap();
            let m = build_multiplier(&p, BuildOptions::default()).unwrap();
            interior_gradient_ratio(&m, 0.5, 1.0, 1.0).unwrap()
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!(vals.iter().all(|v| (v - mean).abs() <= 0.5 * mean), "{vals:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_multipliers_sit_in_the_sandwich(
        m in 1.0f64..20.0,
        k in 1.0f64..4.0,
        wfrac in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let p = PotentialPair::random(b2(48), m, k, wfrac * k, seed).unwrap();
        let mult = build_multiplier(&p, BuildOptions::default()).unwrap();
        let (lo, hi) = sandwich(&mult);
        prop_assert!(lo >= 1.0 - 1e-12 && hi <= 1.0 + 1e-12);
        let rep = mult.report.unwrap();
        prop_assert_eq!(rep.monotone_violations, 0);
        // ψ = log φ nodewise.
        for i in 0..mult.phi.len() {
            prop_assert_eq!(mult.psi.get(i), mult.phi.get(i).ln());
        }
    }
}
