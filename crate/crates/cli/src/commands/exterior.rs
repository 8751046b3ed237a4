use std::path::Path;

use landis_core::exterior::{closed_terms, exterior_pipeline, tau_schedule, ClosedTerms, ExteriorFamily, ExteriorOptions, ExteriorReport};
use landis_core::LandisError;

use super::{core_err, Cell, Csv};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &["a", "r_list", "ctilde", "family", "n_multiplier"];
const CMD: &str = "exterior";

/// Distance of the working origin from the hole center.
const SHIFT: f64 = 2.5;
/// Largest fine grid the pipeline is run on.
const MAX_FINE_N: f64 = 2048.0;

pub fn run(cfg: &Config, out: &Path) -> CliResult<()> {
    cfg.check_keys(KEYS)?;
    let e = core_err(CMD);
    let big_a = cfg.f64_or("a", 2.0)?;
    let radii = cfg.list_or::<f64>("r_list", &[12.5, 16.5, 22.5])?;
    let c_tilde = cfg.positive_f64_or("ctilde", 10.0)?;
    let family = match cfg.str_or("family", "exp").as_str() {
        "exp" => ExteriorFamily::Exp,
        "zero" => ExteriorFamily::Zero,
        other => return Err(CliError::Config(format!("unknown family '{other}'"))),
    };
    let mut opts = ExteriorOptions::default();
    opts.build.tol = cfg.tol_or(opts.build.tol)?;
    opts.n_multiplier = cfg.usize_or("n_multiplier", opts.n_multiplier)?;
    if let Some(n) = cfg.str_opt("grid_n") {
        opts.n_fine = Some(n.parse().map_err(|_| CliError::Config(format!("'grid_n': cannot parse '{n}'")))?);
    }

    let mut csv = Csv::new(
        CMD,
        out,
        "exterior_terms.csv",
        &[
            "R", "R_int", "tau", "lhs", "term1", "term2", "term3", "term4", "certified_bound", "log_certified_bound",
            "closed_term1", "closed_term2", "closed_term3", "closed_term4", "absorbed", "status",
        ],
    )?;
    let mut failures = Vec::new();
    let mut previous: Option<ClosedTerms> = None;
    for &r in &radii {
        let r_int = r - SHIFT;
        let tau = tau_schedule(big_a, r_int, c_tilde).map_err(&e)?;
        let closed = closed_terms(big_a, r_int, tau);
        if !closed.term4_valid {
            failures.push(serde_json::json!({"R": r, "stage": "term4-positivity", "tau": tau}));
        }
        if let Some(p) = previous.filter(|_| radii.windows(2).all(|w| w[1] > w[0])) {
            for (name, a, b) in [
                ("term2-decay", p.log_term2, closed.log_term2),
                ("term3-decay", p.log_term3, closed.log_term3),
                ("term4-decay", p.log_term4, closed.log_term4),
            ] {
                if !(b < a) {
                    failures.push(serde_json::json!({"R": r, "stage": name, "previous": a, "value": b}));
                }
            }
        }
        previous = Some(closed);

        let feasible = opts.n_fine.is_some() || 48.0 * big_a * r_int <= MAX_FINE_N;
        let (rep, status): (Option<ExteriorReport>, String) = if feasible {
            match exterior_pipeline(family, big_a, r, c_tilde, &opts) {
                Ok(rep) => (Some(rep), "ran".into()),
                Err(LandisError::InvalidArgument(m)) => return Err(CliError::Config(m)),
                Err(err) => {
                    failures.push(serde_json::json!({"R": r, "stage": "pipeline", "error": err.to_string()}));
                    (None, "failed".into())
                }
            }
        } else {
            (None, "skipped-grid".into())
        };
        let nan = f64::NAN;
        let m = rep.as_ref().map(|x| &x.measured);
        if let Some(rep) = &rep {
            if !rep.measured.absorbed {
                failures.push(serde_json::json!({
                    "R": r, "stage": "absorption", "lhs": rep.measured.log_lhs, "term1": rep.measured.log_x,
                    "term2": rep.measured.log_y, "term3": rep.measured.log_g, "term4": rep.measured.log_h2,
                }));
            } else if rep.log_certified_mass > rep.log_measured_mass {
                failures.push(serde_json::json!({"R": r, "stage": "soundness", "certified": rep.log_certified_mass, "measured": rep.log_measured_mass}));
            }
        }
        let log_cert = rep.as_ref().map_or(nan, |x| x.log_certified_mass);
        csv.row(&[
            Cell::F(r),
            Cell::F(r_int),
            Cell::F(tau),
            Cell::F(m.map_or(nan, |m| m.log_lhs)),
            Cell::F(m.map_or(nan, |m| m.log_x)),
            Cell::F(m.map_or(nan, |m| m.log_y)),
            Cell::F(m.map_or(nan, |m| m.log_g)),
            Cell::F(m.map_or(nan, |m| m.log_h2)),
            Cell::F(log_cert.exp()),
            Cell::F(log_cert),
            Cell::F(closed.log_term1_factor),
            Cell::F(closed.log_term2),
            Cell::F(closed.log_term3),
            Cell::F(closed.log_term4),
            Cell::B(m.is_some_and(|m| m.absorbed)),
            Cell::S(status.clone()),
        ])?;
        println!("exterior: R = {r} τ = {tau:.3} {status} log certified mass = {log_cert:.4}");
    }
    csv.finish()?;
    if !failures.is_empty() {
        let first = failures[0]["stage"].as_str().unwrap_or("stage-check").to_string();
        return Err(CliError::failure(CMD, &first, format!("{} check(s) failed", failures.len()), serde_json::Value::Array(failures)));
    }
    Ok(())
}
