use landis_core::ops::{dbar, del, laplacian};
use landis_core::{ComplexField, GridSpec, ScalarField, C64};
use proptest::prelude::*;

fn disc(r: f64, n: usize) -> std::sync::Arc<landis_core::Grid> {
    GridSpec::disc(r, n).unwrap().build()
}

#[test]
fn laplacian_of_radius_squared_is_four() {
    let g = disc(1.0, 32);
    let f = ScalarField::from_fn(g, |z| z.norm_sqr()).unwrap();
    let lap = laplacian(&f);
    for k in (0..lap.len()).filter(|&k| lap.is_valid(k)) {
        assert!((lap.get(k) - 4.0).abs() < 1e-9);
    }
}

#[test]
fn laplacian_of_x_vanishes() {
    let f = ScalarField::from_fn(disc(1.0, 32), |z| z.re).unwrap();
    assert!(laplacian(&f).sup() < 1e-10);
}

fn sin_error(n: usize) -> f64 {
    let f = ScalarField::from_fn(disc(1.0, n), |z| z.re.sin()).unwrap();
    laplacian(&f).map_with_point(|z, v| v + z.re.sin()).sup()
}

#[test]
fn laplacian_converges_at_second_order() {
    let ratio = sin_error(32) / sin_error(64);
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn dbar_and_del_of_coordinates() {
    let g = disc(1.0, 32);
    let z = ComplexField::from_fn(g.clone(), |z| z).unwrap();
    let zb = ComplexField::from_fn(g, |z| z.conj()).unwrap();
    let one = C64::new(1.0, 0.0);
    assert!(dbar(&z).sup() < 1e-12);
    assert!(del(&z).map(|v| v - one).sup() < 1e-12);
    assert!(dbar(&zb).map(|v| v - one).sup() < 1e-12);
}

#[test]
fn dbar_of_modulus_squared_is_z() {
    let g = disc(1.0, 64);
    let f = ComplexField::from_fn(g, |z| C64::new(z.norm_sqr(), 0.0)).unwrap();
    let err = dbar(&f).map_with_point(|z, v| v - z).sup();
    assert!(err < 1e-12, "{err}");
}

#[test]
fn sup_norm_examples() {
    let g = disc(2.0, 128);
    let h = g.h();
    let one = ScalarField::constant(g.clone(), 1.0);
    assert_eq!(one.sup_norm(C64::new(0.3, -0.2), 0.5).unwrap(), 1.0);
    let q = ScalarField::from_fn(g.clone(), |z| z.powu(2).re).unwrap();
    for r in [0.5, 1.0, 1.5] {
        let s = q.sup_norm(C64::new(0.0, 0.0), r).unwrap();
        assert!(s <= r * r + 1e-12 && s >= r * r - 2.0 * r * h, "r {r}: {s}");
    }
    let x = ScalarField::from_fn(g, |z| z.re).unwrap();
    let s = x.sup_norm(C64::new(0.0, 0.0), 1.0).unwrap();
    assert!((s - 1.0).abs() <= h);
}

#[test]
fn sup_norm_on_empty_disc_errors() {
    let f = ScalarField::constant(disc(1.0, 16), 1.0);
    assert!(f.sup_norm(C64::new(5.0, 5.0), 0.1).is_err());
}

#[test]
fn coarse_grids_are_rejected() {
    assert!(GridSpec::disc(1.0, 15).is_err());
    assert!(GridSpec::disc(-1.0, 32).is_err());
}

#[test]
fn mask_is_the_closed_disc() {
    let spec = GridSpec::new(C64::new(0.25, -0.5), 1.0, 40).unwrap();
    let g = spec.build();
    for k in 0..g.len() {
        assert!((g.point(k) - spec.center()).norm() <= 1.0 + 1e-12);
    }
    // Every lattice node within the disc is present.
    let h = g.h();
    let count = (-40i64..=40)
        .flat_map(|i| (-40i64..=40).map(move |j| C64::new(0.25 + i as f64 * h, -0.5 + j as f64 * h)))
        .filter(|p| (p - spec.center()).norm() <= 1.0 - 1e-12)
        .count();
    assert!(g.len() >= count);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_exact_on_cubics(c in prop::array::uniform10(-2.0f64..2.0)) {
        let p = |z: C64| {
            let (x, y) = (z.re, z.im);
            c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
                + c[6] * x * x * x + c[7] * x * x * y + c[8] * x * y * y + c[9] * y * y * y
        };
        let lap_exact = |z: C64| {
            let (x, y) = (z.re, z.im);
            2.0 * c[3] + 2.0 * c[5] + 6.0 * c[6] * x + 2.0 * c[7] * y + 2.0 * c[8] * x + 6.0 * c[9] * y
        };
        let f = ScalarField::from_fn(disc(1.0, 24), p).unwrap();
        let err = laplacian(&f).map_with_point(|z, v| v - lap_exact(z)).sup();
        prop_assert!(err < 1e-8, "err {}", err);
    }

    #[test]
    fn del_dbar_matches_laplacian(a in -1.0f64..1.0, b in -1.0f64..1.0, k in 0.5f64..2.0) {
        let f = |z: C64| C64::new((k * z.re).sin() * (b * z.im).cos() + a * z.re * z.im.powi(3), 0.0);
        let errs: Vec<f64> = [32usize, 64].iter().map(|&n| {
            let g = disc(1.0, n);
            let fc = ComplexField::from_fn(g.clone(), f).unwrap();
            let lhs = del(&dbar(&fc)).map(|v| v * 4.0);
            let rhs = laplacian(&fc);
            let d = lhs.zip_with(&rhs, |x, y| (x - y).norm()).unwrap();
            // del∘dbar uses a wider stencil; restrict to nodes valid for both.
            (0..d.len()).filter(|&i| d.is_valid(i)).map(|i| d.get(i)).fold(0.0, f64::max)
        }).collect();
        prop_assert!(errs[1] <= errs[0] * 0.3 + 1e-9, "{:?}", errs);
    }

    #[test]
    fn sup_norm_monotone_in_radius(r1 in 0.05f64..1.5, dr in 0.0f64..0.4, cx in -0.3f64..0.3, seed in 0u64..100) {
        let g = disc(2.0, 48);
        let f = ScalarField::from_fn(g, |z| ((seed as f64 + 1.0) * z.re).sin() + z.im * z.im).unwrap();
        let c = C64::new(cx, 0.0);
        if let (Ok(a), Ok(b)) = (f.sup_norm(c, r1), f.sup_norm(c, r1 + dr)) {
            prop_assert!(a <= b);
        }
    }
}
