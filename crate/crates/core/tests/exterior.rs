use landis_core::exterior::{
    apriori_mass, bump, carleman_verify, closed_terms, exterior_pipeline, log_sum, radial_weight, random_test_function,
    tau_schedule, weight, weight_laplacian_check, CarlemanWeight, CutoffGeometry, ExteriorFamily, ExteriorOptions,
};
use landis_core::reduction::Cutoff;
use landis_core::{ComplexField, GridSpec, C64};
use proptest::prelude::*;

fn b14(n: usize) -> std::sync::Arc<landis_core::Grid> {
    GridSpec::disc(1.4, n).unwrap().build()
}

#[test]
fn weight_examples() {
    for tau in [9.0, 50.0, 300.0] {
        assert!((weight(tau, C64::from_polar(1.0, 0.7)).unwrap() - 1.0).abs() < 1e-14);
    }
    assert!((weight(10.0, C64::new(0.0, 0.5)).unwrap() - 7.1815).abs() < 1e-4);
    assert!(weight(10.0, C64::new(0.0, 0.0)).is_err());
    assert!(CarlemanWeight::new(8.0).is_err());
    let w = CarlemanWeight::new(10.0).unwrap();
    assert_eq!(w.eval(C64::new(0.5, 0.0)).unwrap(), radial_weight(10.0, 0.5));
}

fn laplacian_error(n: usize) -> f64 {
    let c = weight_laplacian_check(20.0, &GridSpec::disc(1.4, n).unwrap().build()).unwrap();
    (c.min - 4.0).abs().max((c.max - 4.0).abs())
}

#[test]
fn weight_laplacian_is_four() {
    let (e1, e2) = (laplacian_error(224), laplacian_error(448));
    assert!(e1 / e2 > 3.5, "{e1} -> {e2}");
    assert!(e2 < 0.5);
}

#[test]
fn carleman_on_zero_is_trivial() {
    let h = ComplexField::from_fn(b14(128), |_| C64::new(0.0, 0.0)).unwrap();
    let c = carleman_verify(&h, 10.0).unwrap();
    assert_eq!(c.ratio, 1.0);
    assert_eq!(c.lhs(), 0.0);
}

fn cubic_bump(n: usize) -> f64 {
    let g = b14(n);
    let h = ComplexField::from_fn(g.clone(), |z| z.powu(3) * bump((z.norm() - 0.7) / 0.5)).unwrap();
    carleman_verify(&h, 10.0).unwrap().ratio
}

#[test]
fn carleman_holds_for_a_cubic_bump() {
    let (r1, r2) = (cubic_bump(128), cubic_bump(256));
    assert!(r1 >= 1.0 - 10.0 * 2.8 / 128.0);
    assert!(r2 >= 1.0 - 10.0 * 2.8 / 256.0);
    assert!(r1 > 1.0 && r2 > 1.0, "{r1} {r2}");
}

#[test]
fn carleman_holds_for_random_test_functions() {
    let g = b14(192);
    for seed in 0..20 {
        let h = random_test_function(&g, seed).unwrap();
        for tau in [10.0, 20.0, 40.0] {
            let c = carleman_verify(&h, tau).unwrap();
            assert!(c.ratio >= 1.0 - 20.0 * g.h(), "seed {seed}, τ = {tau}: {}", c.ratio);
        }
    }
}

#[test]
fn carleman_rejects_bad_support() {
    let g = b14(128);
    let h = ComplexField::from_fn(g.clone(), |z| z).unwrap();
    assert!(carleman_verify(&h, 10.0).is_err());
    let h = ComplexField::from_fn(g, |z| C64::new(bump(z.norm() / 0.5), 0.0)).unwrap();
    assert!(carleman_verify(&h, 10.0).is_err());
}

#[test]
fn tau_schedule_examples() {
    assert!((tau_schedule(2.0, 10.0, 5.0).unwrap() - 299.57).abs() < 0.01);
    assert!(tau_schedule(1.0, 3.0, 1.0).is_err());
    assert!(tau_schedule(1.0, 2.0, 100.0).is_err());
    let base = tau_schedule(2.0, 10.0, 5.0).unwrap();
    assert!(tau_schedule(3.0, 10.0, 5.0).unwrap() > base);
    assert!(tau_schedule(2.0, 11.0, 5.0).unwrap() > base);
    assert!(tau_schedule(2.0, 10.0, 6.0).unwrap() > base);
}

#[test]
fn closed_terms_decay_in_r() {
    let terms: Vec<_> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&r| closed_terms(2.0, r, tau_schedule(2.0, r, 5.0).unwrap()))
        .collect();
    for w in terms.windows(2) {
        assert!(w[1].log_term2 < w[0].log_term2);
        assert!(w[1].log_term3 < w[0].log_term3);
        assert!(w[1].log_term4 < w[0].log_term4);
    }
    for (t, r) in terms.iter().zip([10.0f64, 100.0, 1000.0]) {
        assert!(t.term4_valid);
        assert!(t.log_term4 <= -5.0 * (2.0 * r).ln() + 1.01f64.ln());
    }
}

#[test]
fn geometry_examples() {
    let geo = CutoffGeometry::new(2.0, 10.0).unwrap();
    assert_eq!(geo.scale(), 20.0);
    assert!((geo.zhat + 0.5).abs() < 1e-15);
    assert!((geo.z1 + 0.5 + 2.5 / 20.0).abs() < 1e-15);
    assert!((geo.a + 0.5 + 11.0 / 160.0).abs() < 1e-15);
    assert_eq!(geo.anchor(), geo.a);
    assert_eq!(geo.zeta(C64::new(0.5, 0.0)), 1.0);
    assert_eq!(geo.zeta(C64::new(1.3, 0.0)), 0.0);
    assert_eq!(geo.zeta(C64::new(0.01, 0.0)), 0.0);
    assert_eq!(geo.chi(geo.z1_point()), 0.0);
    assert_eq!(geo.chi(C64::new(0.5, 0.0)), 1.0);
    assert!(geo.in_zhat_ball(geo.zhat_point()));
    assert!(CutoffGeometry::new(0.0, 10.0).is_err());
}

#[test]
fn apriori_mass_examples() {
    assert_eq!(apriori_mass(|_| 0.0, 16), 0.0);
    let m = apriori_mass(|_| 1.0, 16);
    assert!((m - std::f64::consts::PI).abs() < 1e-12);
    // The worst disc is centered at (5/2, 0); by Jensen its mass exceeds π e^{−5}.
    let m = apriori_mass(|z| (-z.re).exp(), 64);
    assert!(m > std::f64::consts::PI * (-5f64).exp() && m < std::f64::consts::PI * (-3f64).exp());
}

#[test]
fn zero_family_fails_the_apriori_condition() {
    assert!(exterior_pipeline(ExteriorFamily::Zero, 2.0, 12.5, 10.0, &ExteriorOptions::default()).is_err());
    assert!(exterior_pipeline(ExteriorFamily::Exp, 2.0, 5.0, 10.0, &ExteriorOptions::default()).is_err());
}

#[test]
fn exterior_pipeline_is_sound_on_the_exponential() {
    let rep = exterior_pipeline(ExteriorFamily::Exp, 2.0, 6.5, 10.0, &ExteriorOptions::default()).unwrap();
    assert_eq!(rep.r_int, 4.0);
    assert!(rep.apriori_mass > 0.0);
    assert!(rep.measured.h2_support_leak < 1e-12, "{:?}", rep.measured);
    if rep.measured.absorbed {
        assert!(rep.log_certified_mass <= rep.log_measured_mass, "{rep:?}");
    }
    // sup over B_1(z0) of e^{−x} at |z0| = 6.5 is e^{−5.5}; the mass is at most π times its square.
    assert!(rep.log_measured_mass <= std::f64::consts::PI.ln() - 11.0 + 1e-6);
}

#[test]
fn log_sum_matches_direct_sum() {
    let ls = [-1.0f64, 0.5, 2.0];
    let direct = ls.iter().map(|l| l.exp()).sum::<f64>().ln();
    assert!((log_sum(&ls) - direct).abs() < 1e-14);
    assert!((log_sum(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    assert_eq!(log_sum(&[]), f64::NEG_INFINITY);
}

proptest! {
    #[test]
    fn weight_decreases_on_the_working_disc(tau in 8.01f64..500.0, r in 0.01f64..1.39, dr in 1e-4f64..0.01) {
        prop_assert!(radial_weight(tau, r + dr) < radial_weight(tau, r));
    }

    #[test]
    fn geometry_invariants_hold(a in 2.0f64..6.0, r in 4.0f64..500.0) {
        let geo = CutoffGeometry::new(a, r).unwrap();
        let s = geo.scale();
        prop_assert!(geo.z1.abs() + 1.0 / s <= 1.4);
        // The ẑ-ball lies inside Z, where ζ ≡ 1.
        for k in 0..16 {
            let p = geo.zhat_point() + C64::from_polar(1.0 / s, k as f64 * std::f64::consts::TAU / 16.0);
            prop_assert!(geo.in_z(p) || (p.norm() - 0.5 / s).abs() < 1e-12);
            prop_assert_eq!(geo.zeta(p), 1.0);
        }
        // χ vanishes on the inner disc about z1 and is 1 outside G.
        prop_assert_eq!(geo.chi(geo.z1_point() + C64::new(0.0, 17.0 / (16.0 * s) * 0.99)), 0.0);
        prop_assert_eq!(geo.chi(geo.z1_point() + C64::new(9.0 / (8.0 * s) * 1.01, 0.0)), 1.0);
    }
}
