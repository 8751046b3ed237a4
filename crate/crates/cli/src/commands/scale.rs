use std::path::Path;

use landis_core::field::ScalarField;
use landis_core::multiplier::BuildOptions;
use landis_core::scaling::{landis_point, landis_point_for, CurveOptions, EntireSample, Family, LandisPoint};

use super::{core_err, read_csv, Cell, Csv};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &["family", "degree", "r_list", "a", "n_angles", "u_csv", "v", "c0"];
const CMD: &str = "scale";

pub fn run(cfg: &Config, out: &Path) -> CliResult<()> {
    cfg.check_keys(KEYS)?;
    let e = core_err(CMD);
    let radii = cfg.list_or::<f64>("r_list", &[4.0, 8.0, 16.0, 32.0])?;
    let opts = CurveOptions {
        a: cfg.f64_or("a", 2.0)?,
        n_angles: cfg.usize_or("n_angles", 64)?,
        build: BuildOptions { tol: cfg.tol_or(1e-9)?, ..BuildOptions::default() },
    };
    let family = cfg.str_or("family", "exp");
    let points: Vec<LandisPoint> = match family.as_str() {
        "exp" | "harmonic" => {
            let fam = if family == "exp" { Family::Exp } else { Family::Harmonic(cfg.usize_or("degree", 2)? as u32) };
            radii.iter().map(|&r| landis_point(&fam, r, &opts)).collect::<Result<_, _>>().map_err(&e)?
        }
        "csv" => {
            let u = read_csv(&cfg.required("u_csv")?)?.scalar().map_err(&e)?;
            let v = ScalarField::constant(u.grid().clone(), cfg.f64_or("v", 0.0)?);
            let sample = EntireSample::new(Family::Csv, u, v, cfg.positive_f64_or("c0", 1.0)?).map_err(&e)?;
            radii.iter().map(|&r| landis_point_for(&sample, r, &opts)).collect::<Result<_, _>>().map_err(&e)?
        }
        other => return Err(CliError::Config(format!("unknown family '{other}'"))),
    };

    let mut csv = Csv::new(
        CMD,
        out,
        "landis_curve.csv",
        &["R", "measured_infsup", "certified_bound", "log_certified_bound", "exponent", "valid", "extrapolated", "flagged"],
    )?;
    let mut failures = Vec::new();
    for p in &points {
        csv.row(&[
            Cell::F(p.r),
            Cell::F(p.measured_infsup),
            Cell::F(p.certified_bound),
            Cell::F(p.log_certified_bound),
            Cell::F(p.exponent),
            Cell::B(p.valid),
            Cell::B(p.extrapolated),
            Cell::B(p.flagged),
        ])?;
        if !(p.measured_infsup.ln() >= p.log_certified_bound) {
            failures.push(serde_json::json!({"R": p.r, "stage": "soundness", "measured": p.measured_infsup, "log_bound": p.log_certified_bound}));
        }
        for c in p.checks.iter().filter(|c| !c.pass) {
            failures.push(serde_json::json!({"R": p.r, "stage": c.stage, "value": c.value, "threshold": c.threshold}));
        }
        println!(
            "scale: R = {} inf-sup = {:.6e} certified = exp({:.4}) valid = {}",
            p.r, p.measured_infsup, p.log_certified_bound, p.valid
        );
    }
    csv.finish()?;
    if !failures.is_empty() {
        let first = failures[0]["stage"].as_str().unwrap_or("stage-check").to_string();
        return Err(CliError::failure(CMD, &first, format!("{} check(s) failed", failures.len()), serde_json::Value::Array(failures)));
    }
    Ok(())
}
