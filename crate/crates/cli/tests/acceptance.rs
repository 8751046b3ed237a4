//! Acceptance criteria 1–10 at their pinned tolerances. Prints one PASS/FAIL
//! line per criterion and exits nonzero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use landis_core::cauchy::{cauchy_transform, CauchyQuadrature};
use landis_core::exterior::{carleman_verify, closed_terms, random_test_function, tau_schedule};
use landis_core::io::fmt_f64;
use landis_core::multiplier::{build_multiplier, lipschitz_constant, operator_residual, BuildOptions};
use landis_core::ops::dbar;
use landis_core::order::{
    empirical_order, hadamard_check, hadamard_check_analytic, log_log_slope, vanishing_order_bound, OrderOptions,
    ThetaVariant,
};
use landis_core::potential::PotentialPair;
use landis_core::reduction::{dichotomy_threshold, gradient_case_analysis, gradient_lower_bound, GradientCase};
use landis_core::scaling::{landis_point, CurveOptions, Family};
use landis_core::{ComplexField, GridSpec, ScalarField, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
    rows: Vec<Vec<String>>,
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn b2(n: usize) -> std::sync::Arc<landis_core::Grid> {
    GridSpec::disc(2.0, n).unwrap().build()
}

/// Multiplier sweep shared by criteria 1 and 2: (M, K, seed, lo, hi, residual, bound, |∇ψ|).
fn multiplier_sweep() -> Vec<[f64; 8]> {
    let g = b2(64);
    let opts = BuildOptions { tol: 1e-10, ..BuildOptions::default() };
    let h2 = g.h() * g.h();
    let mut out = Vec::new();
    for m in [1.0f64, 4.0, 16.0] {
        for k in [1.0f64, 4.0] {
            for seed in 0..20 {
                let p = PotentialPair::random(g.clone(), m, k, k, SEED + seed).unwrap();
                let mm = build_multiplier(&p, opts).unwrap();
                let lam = mm.lambda();
                let min = mm.phi.values().iter().copied().fold(f64::INFINITY, f64::min);
                let max = mm.phi.sup();
                let res = operator_residual(&p, &mm.phi).unwrap().sup() / (2.0 * lam).exp();
                let grad = lipschitz_constant(&mm, 1.4).unwrap();
                out.push([m, k, seed as f64, min.ln() + 2.0 * lam, max.ln() - 2.0 * lam, res, 10.0 * opts.tol / h2, grad]);
            }
        }
    }
    out
}

fn c1(sweep: &[[f64; 8]]) -> Outcome {
    let mut worst = (f64::NEG_INFINITY, 0.0f64);
    let mut pass = true;
    let mut rows = vec![["M", "K", "seed", "log_lower_margin", "log_upper_margin", "residual", "residual_bound"]
        .map(String::from)
        .to_vec()];
    for r in sweep {
        let ok = r[3] >= -1e-12 && r[4] <= 1e-12 && r[5] <= r[6];
        pass &= ok;
        worst.0 = worst.0.max(r[5] / r[6]);
        worst.1 = worst.1.max(r[4]);
        rows.push(vec![f(r[0]), f(r[1]), f(r[2]), f(r[3]), f(r[4]), f(r[5]), f(r[6])]);
    }
    Outcome {
        pass,
        detail: format!("{} builds, max residual/bound = {:.3}, max log(φ/e^(2λ)) = {:.3}", sweep.len(), worst.0, worst.1),
        rows,
    }
}

fn c2(sweep: &[[f64; 8]]) -> Outcome {
    let xs: Vec<f64> = sweep.iter().map(|r| r[0].sqrt() + r[1]).collect();
    let ys: Vec<f64> = sweep.iter().map(|r| r[7]).collect();
    let slope = log_log_slope(&xs, &ys);
    let mut rows = vec![vec!["lambda".to_string(), "grad_psi_sup".to_string()]];
    rows.extend(xs.iter().zip(&ys).map(|(x, y)| vec![f(*x), f(*y)]));
    rows.push(vec!["slope".into(), f(slope)]);
    Outcome { pass: (0.7..=1.3).contains(&slope), detail: format!("slope = {slope:.4} (need [0.7, 1.3])"), rows }
}

fn c3() -> Outcome {
    let q = CauchyQuadrature::default();
    let err = |n: usize, seed: u64| {
        let g = GridSpec::disc(1.5, n).unwrap().build();
        let fv = random_test_function(&g, SEED + seed).unwrap();
        let t = cauchy_transform(&fv, &q).unwrap();
        dbar(&t).zip_with(&fv, |a, b| a - b).unwrap().abs().sup()
    };
    let mut rows = vec![["seed", "err_h", "err_h2", "factor"].map(String::from).to_vec()];
    let mut min_factor = f64::INFINITY;
    for seed in 0..10 {
        let (e1, e2) = (err(96, seed), err(192, seed));
        min_factor = min_factor.min(e1 / e2);
        rows.push(vec![seed.to_string(), f(e1), f(e2), f(e1 / e2)]);
    }
    let g = GridSpec::disc(1.0, 128).unwrap().build();
    let one = ComplexField::constant(g.clone(), C64::new(1.0, 0.0));
    let t = cauchy_transform(&one, &q).unwrap();
    let conj_err = t.map_with_point(|z, v| (v - z.conj()).norm()).sup();
    rows.push(vec!["unit_disc".into(), f(conj_err), f(3.0 * g.h()), String::new()]);
    Outcome {
        pass: min_factor >= 1.8 && conj_err <= 3.0 * g.h(),
        detail: format!("min refinement factor = {min_factor:.3} (need ≥ 1.8), |T1 − z̄| = {conj_err:.2e} vs 3h = {:.2e}", 3.0 * g.h()),
        rows,
    }
}

fn c4() -> Outcome {
    let mut rows = vec![["case", "slack", "bound"].map(String::from).to_vec()];
    let mut pass = true;
    let mut worst_mono = 0.0f64;
    for n in 1..=8u32 {
        for (r, r1, r2) in [(0.1, 0.5, 1.0), (0.2, 0.7, 1.3), (0.05, 1.0, 1.2)] {
            let c = hadamard_check_analytic(|z: C64| z.powu(n), r, r1, r2, ThetaVariant::Standard).unwrap();
            worst_mono = worst_mono.max(c.slack().abs());
            pass &= c.slack().abs() <= 1e-10;
            rows.push(vec![format!("z^{n}"), f(c.slack()), f(1e-10)]);
        }
    }
    let g = b2(128);
    let h = g.h();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_poly = f64::NEG_INFINITY;
    for i in 0..50 {
        let deg = rng.gen_range(1..=6);
        let cs: Vec<C64> = (0..=deg).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let r = rng.gen_range(0.1..0.6);
        let p = ComplexField::from_fn(g.clone(), |z| cs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)).unwrap();
        let c = hadamard_check(&p, r, 1.0, 1.2, ThetaVariant::Standard).unwrap();
        worst_poly = worst_poly.max(c.slack());
        pass &= c.slack() <= 10.0 * h;
        rows.push(vec![format!("poly{i}"), f(c.slack()), f(10.0 * h)]);
    }
    Outcome {
        pass,
        detail: format!("max monomial |slack| = {worst_mono:.1e}, max polynomial slack = {worst_poly:.2e} vs 10h = {:.2e}", 10.0 * h),
        rows,
    }
}

fn c5() -> Outcome {
    let g = b2(128);
    let opts = OrderOptions { build: BuildOptions { tol: 1e-10, ..BuildOptions::default() }, ..OrderOptions::default() };
    let radii: Vec<f64> = (0..6).map(|i| 4.0 * g.h() * (1.0 + 1e-9) * 10f64.powf(i as f64 / 5.0)).collect();
    let c0 = |u: &ScalarField, lam: f64| u.sup().max(1.0).ln() / lam * (1.0 + 1e-9) + 1e-12;
    let mut rows = vec![["case", "E_certified", "E_empirical", "E_over_lambda"].map(String::from).to_vec()];
    let mut pass = true;
    let mut notes = Vec::new();
    for n in 1..=6u32 {
        let u = ScalarField::from_fn(g.clone(), |z| z.powu(n).re).unwrap();
        let p = PotentialPair::constant(g.clone(), 0.0, (0.0, 0.0), 1.0, 1.0).unwrap();
        let est = vanishing_order_bound(&u, &p, c0(&u, p.lambda()), 0.15, &opts).unwrap();
        let emp = empirical_order(&u, &radii).unwrap();
        pass &= est.valid && est.exponent >= n as f64 && (emp - n as f64).abs() <= 0.05;
        notes.push(format!("{:.2}/{:.3}", est.exponent, emp));
        rows.push(vec![format!("harmonic-{n}"), f(est.exponent), f(emp), f(est.exponent / p.lambda())]);
    }
    let mut ratios = Vec::new();
    for m in [1.0f64, 4.0, 16.0] {
        let u = ScalarField::from_fn(g.clone(), |z| (m.sqrt() * z.re).exp()).unwrap();
        let p = PotentialPair::constant(g.clone(), m, (0.0, 0.0), m, 1.0).unwrap();
        let est = vanishing_order_bound(&u, &p, c0(&u, p.lambda()), 0.15, &opts).unwrap();
        pass &= est.valid;
        ratios.push(est.exponent / p.lambda());
        rows.push(vec![format!("exp-{m}"), f(est.exponent), String::new(), f(est.exponent / p.lambda())]);
    }
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    pass &= spread <= 10.0 && ratios.iter().all(|r| *r > 0.0);
    Outcome {
        pass,
        detail: format!("harmonic E_cert/E_emp = [{}], V ≡ M max/min of E/λ = {spread:.3}", notes.join(", ")),
        rows,
    }
}

fn c6() -> Outcome {
    let opts = CurveOptions::default();
    let mut rows = vec![["R", "measured_infsup", "expected", "log_certified_bound"].map(String::from).to_vec()];
    let mut pass = true;
    let mut notes = Vec::new();
    for r in [4.0f64, 8.0, 16.0, 32.0] {
        let p = landis_point(&Family::Exp, r, &opts).unwrap();
        let expected = (1.0 - r).exp();
        let rel = (p.measured_infsup / expected - 1.0).abs();
        pass &= rel <= 0.05 && p.log_certified_bound < p.measured_infsup.ln() && p.valid;
        notes.push(format!("R={r}: rel {rel:.1e}, log bound {:.1}", p.log_certified_bound));
        rows.push(vec![f(r), f(p.measured_infsup), f(expected), f(p.log_certified_bound)]);
    }
    Outcome { pass, detail: notes.join("; "), rows }
}

fn c7() -> Outcome {
    let g = GridSpec::disc(1.4, 192).unwrap().build();
    let tol = 1.0 - 20.0 * g.h();
    let mut rows = vec![["seed", "tau", "ratio"].map(String::from).to_vec()];
    let mut min_ratio = f64::INFINITY;
    for seed in 0..150 {
        let hf = random_test_function(&g, SEED + seed).unwrap();
        for tau in [10.0, 20.0, 40.0] {
            let c = carleman_verify(&hf, tau).unwrap();
            min_ratio = min_ratio.min(c.ratio);
            rows.push(vec![seed.to_string(), f(tau), f(c.ratio)]);
        }
    }
    Outcome { pass: min_ratio >= tol, detail: format!("450 cases, min lhs/rhs = {min_ratio:.4} vs 1 − 20h = {tol:.4}"), rows }
}

fn c8() -> Outcome {
    let mut rows = vec![["R", "tau", "log_term2", "log_term3", "log_term4", "log_bound4"].map(String::from).to_vec()];
    let terms: Vec<_> = [10.0f64, 100.0, 1000.0]
        .iter()
        .map(|&r| (r, closed_terms(2.0, r, tau_schedule(2.0, r, 5.0).unwrap())))
        .collect();
    let mut pass = true;
    for w in terms.windows(2) {
        pass &= w[1].1.log_term2 < w[0].1.log_term2 && w[1].1.log_term3 < w[0].1.log_term3 && w[1].1.log_term4 < w[0].1.log_term4;
    }
    for (r, t) in &terms {
        let bound = -5.0 * (2.0 * r).ln() + 1.01f64.ln();
        pass &= t.log_term4 <= bound;
        rows.push(vec![f(*r), f(t.tau), f(t.log_term2), f(t.log_term3), f(t.log_term4), f(bound)]);
    }
    let l4: Vec<String> = terms.iter().map(|(_, t)| format!("{:.2}", t.log_term4)).collect();
    Outcome { pass, detail: format!("log term (iv) = [{}]", l4.join(", ")), rows }
}

fn c9() -> Outcome {
    let a = dichotomy_threshold(1.0, 1.0);
    let b = gradient_lower_bound(1.0, 1.0);
    let exact = a == 0.5 * (-8f64).exp() && b == 0.5 * (-4f64).exp();
    let g = b2(128);
    let p = PotentialPair::constant(g.clone(), 0.0, (0.0, 0.0), 1.0, 1.0).unwrap();
    let m = build_multiplier(&p, BuildOptions::default()).unwrap();
    let u = ScalarField::from_fn(g, |z| z.re).unwrap();
    let (branch, measured, bound) = match gradient_case_analysis(&u, &m).unwrap() {
        GradientCase::Gradient { bound, measured, .. } => (true, measured, bound),
        GradientCase::Uniform { .. } => (false, f64::NAN, b),
    };
    Outcome {
        pass: exact && branch && measured >= bound,
        detail: format!("a = {a:.6e}, bound = {b:.6e}, u = x: gradient branch = {branch}, measured = {measured:.4}"),
        rows: vec![
            ["a", "bound", "measured"].map(String::from).to_vec(),
            vec![f(a), f(b), f(measured)],
        ],
    }
}

fn write_rows(dir: &Path, name: &str, rows: &[Vec<String>]) {
    let mut w = csv::Writer::from_path(dir.join(name)).unwrap();
    for r in rows {
        w.write_record(r).unwrap();
    }
    w.flush().unwrap();
}

/// Criteria 1–9; CSVs go to `dir`.
fn suite(dir: &Path, report: &mut dyn FnMut(usize, &Outcome, Duration, Duration)) {
    let t = Instant::now();
    let sweep = multiplier_sweep();
    let shared = t.elapsed();
    let mut run = |i: usize, limit: u64, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let dt = t.elapsed() + if i <= 2 { shared } else { Duration::ZERO };
        write_rows(dir, &format!("criterion{i}.csv"), &o.rows);
        report(i, &o, dt, Duration::from_secs(limit));
    };
    run(1, 120, &|| c1(&sweep));
    run(2, 120, &|| c2(&sweep));
    run(3, 60, &c3);
    run(4, 30, &c4);
    run(5, 180, &c5);
    run(6, 120, &c6);
    run(7, 120, &c7);
    run(8, 10, &c8);
    run(9, 30, &c9);
}

fn main() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let mut failed = 0;
    suite(first.path(), &mut |i, o, dt, limit| {
        let ok = o.pass && dt <= limit;
        failed += usize::from(!ok);
        let time = format!("{:.1}s of {}s", dt.as_secs_f64(), limit.as_secs());
        println!("criterion {i:>2}: {} {} [{time}]", if ok { "PASS" } else { "FAIL" }, o.detail);
    });
    suite(second.path(), &mut |_, _, _, _| {});
    let mut differing = Vec::new();
    for i in 1..=9 {
        let name = format!("criterion{i}.csv");
        if std::fs::read(first.path().join(&name)).unwrap() != std::fs::read(second.path().join(&name)).unwrap() {
            differing.push(name);
        }
    }
    let ok = differing.is_empty();
    failed += usize::from(!ok);
    println!(
        "criterion 10: {} second run of criteria 1-9: {}",
        if ok { "PASS" } else { "FAIL" },
        if ok { "all 9 CSVs byte-identical".to_string() } else { format!("differs in {}", differing.join(", ")) }
    );
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
