use std::path::Path;


use landis_core::field::ScalarField;
use landis_core::grid::GridSpec;
use landis_core::multiplier::BuildOptions;
use landis_core::order::{empirical_order, vanishing_order_bound, DriftForm, OrderEstimate, OrderOptions};
use landis_core::potential::{zero_drift, PotentialPair};

use super::{core_err, read_csv, Cell, Csv};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &["family", "degrees", "m_list", "k", "r", "form", "u_csv", "v"];
const CMD: &str = "order";

struct Case {
    label: String,
    u: ScalarField,
    pot: PotentialPair,
    /// Known vanishing order, if any.
    exact: Option<f64>,
}

/// u = Re zⁿ (V ≡ 0) or u = e^{√M x} (V ≡ M) on B_2, or gridded data with constant V.
fn cases(cfg: &Config, n: usize) -> CliResult<Vec<Case>> {
    let e = core_err(CMD);
    let k = cfg.f64_or("k", 1.0)?;
    let family = cfg.str_or("family", "harmonic");
    match family.as_str() {
        "harmonic" => {
            let grid = GridSpec::disc(2.0, n).map_err(&e)?.build();
            cfg.list_or::<u32>("degrees", &[1, 2, 3, 4, 5, 6])?
                .into_iter()
                .map(|d| {
                    if d == 0 {
                        return Err(CliError::Config("degrees start at 1".into()));
                    }
                    let u = ScalarField::from_fn(grid.clone(), |z| z.powu(d).re).map_err(&e)?;
                    let pot = PotentialPair::constant(grid.clone(), 0.0, (0.0, 0.0), 1.0, k).map_err(&e)?;
                    Ok(Case { label: format!("harmonic-{d}"), u, pot, exact: Some(d as f64) })
                })
                .collect()
        }
        "exp" => {
            let grid = GridSpec::disc(2.0, n).map_err(&e)?.build();
            cfg.list_or::<f64>("m_list", &[1.0, 4.0, 16.0])?
                .into_iter()
                .map(|m| {
                    let u = ScalarField::from_fn(grid.clone(), |z| (m.sqrt() * z.re).exp()).map_err(&e)?;
                    let pot = PotentialPair::constant(grid.clone(), m, (0.0, 0.0), m, k).map_err(&e)?;
                    Ok(Case { label: format!("exp-{m}"), u, pot, exact: Some(0.0) })
                })
                .collect()
        }
        "csv" => {
            let u = read_csv(&cfg.required("u_csv")?)?.scalar().map_err(&e)?;
            let g = u.grid().clone();
            if g.center().norm() > 1e-9 || (g.radius() - 2.0).abs() > g.h() {
                return Err(CliError::Config("u_csv must sample B_2(0)".into()));
            }
            let v = cfg.f64_or("v", 0.0)?;
            let pot = PotentialPair::new(ScalarField::constant(g.clone(), v), zero_drift(&g), v.max(1.0), k).map_err(&e)?;
            Ok(vec![Case { label: "csv".into(), u, pot, exact: None }])
        }
        other => Err(CliError::Config(format!("unknown family '{other}'"))),
    }
}

/// Six geometric radii from 4h spanning a decade.
pub fn empirical_radii(h: f64) -> Vec<f64> {
    let lo = 4.0 * h * (1.0 + 1e-9);
    (0..6).map(|i| lo * 10f64.powf(i as f64 / 5.0)).collect()
}

/// Smallest growth constant with ‖u‖_{B_2} ≤ exp(c0·λ).
pub fn growth_constant(u: &ScalarField, lambda: f64) -> f64 {
    (u.sup().max(1.0).ln() / lambda) * (1.0 + 1e-9) + 1e-12
}

pub fn run(cfg: &Config, out: &Path) -> CliResult<()> {
    cfg.check_keys(KEYS)?;
    let e = core_err(CMD);
    let n = cfg.grid_n_or(128)?;
    let tol = cfg.tol_or(1e-10)?;
    let seed = cfg.u64_or("seed", 0)?;
    let r = cfg.positive_f64_or("r", 0.15)?;
    let form = match cfg.str_or("form", "divergence").as_str() {
        "divergence" => DriftForm::Divergence,
        "gradient" => DriftForm::Gradient,
        other => return Err(CliError::Config(format!("unknown form '{other}'"))),
    };
    let opts = OrderOptions { form, build: BuildOptions { tol, ..BuildOptions::default() }, ..OrderOptions::default() };
    let cases = cases(cfg, n)?;

    let mut csv = Csv::new(
        CMD,
        out,
        "certificate.csv",
        &["case", "M", "K", "seed", "E_certified", "E_empirical", "slack", "premultiplier", "r", "valid", "extrapolated"],
    )?;
    let mut failures = Vec::new();
    for case in &cases {
        let lambda = case.pot.lambda();
        let c0 = growth_constant(&case.u, lambda);
        let est: OrderEstimate = vanishing_order_bound(&case.u, &case.pot, c0, r, &opts).map_err(&e)?;
        let emp = empirical_order(&case.u, &empirical_radii(case.u.grid().h())).map_err(&e)?;
        let (slack, prem) = est.certificate.as_ref().map_or((f64::NAN, f64::NAN), |c| (c.slack(), c.premultiplier));
        csv.row(&[
            Cell::S(case.label.clone()),
            Cell::F(case.pot.m),
            Cell::F(case.pot.k),
            Cell::I(seed as i64),
            Cell::F(est.exponent),
            Cell::F(emp),
            Cell::F(slack),
            Cell::F(prem),
            Cell::F(r),
            Cell::B(est.valid),
            Cell::B(est.extrapolated),
        ])?;
        for c in est.checks.iter().filter(|c| !c.pass) {
            failures.push(serde_json::json!({"case": case.label, "stage": c.stage, "value": c.value, "threshold": c.threshold}));
        }
        if let Some(x) = case.exact {
            if est.exponent < x - 1e-9 {
                failures.push(serde_json::json!({"case": case.label, "stage": "soundness", "value": est.exponent, "threshold": x}));
            }
        }
        println!("order: {} E_certified = {:.4} E_empirical = {:.4} valid = {}", case.label, est.exponent, emp, est.valid);
    }
    csv.finish()?;
    if !failures.is_empty() {
        let first = failures[0]["stage"].as_str().unwrap_or("stage-check").to_string();
        return Err(CliError::failure(CMD, &first, format!("{} check(s) failed", failures.len()), serde_json::Value::Array(failures)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use landis_core::C64;

    #[test]
    fn empirical_radii_span_a_decade_from_4h() {
        let r = empirical_radii(1.0 / 32.0);
        assert!(r[0] >= 4.0 / 32.0);
        assert!(r[5] >= 10.0 * r[0] * (1.0 - 1e-9));
        assert!(r.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn growth_constant_covers_the_sup() {
        let g = GridSpec::disc(2.0, 32).unwrap().build();
        let u = ScalarField::from_fn(g, |z: C64| z.powu(3).re).unwrap();
        let c0 = growth_constant(&u, 2.0);
        assert!(u.sup() <= (c0 * 2.0).exp());
    }
}
