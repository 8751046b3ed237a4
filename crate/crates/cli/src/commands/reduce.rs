use std::path::Path;

use serde::Serialize;

use landis_core::exterior::CutoffGeometry;
use landis_core::io::write_complex_csv;
use landis_core::multiplier::Multiplier;
use landis_core::order::REDUCTION_TOL;
use landis_core::reduction::{reduce, Cutoff, ReductionReport};

use super::{core_err, create, read_csv, write_json};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &["u", "multiplier", "m", "k", "exterior"];
const CMD: &str = "reduce";

#[derive(Serialize)]
struct Report {
    exterior: Option<(f64, f64)>,
    relative_residual: f64,
    tolerance: f64,
    reduction: ReductionReport,
}

pub fn run(cfg: &Config, out: &Path) -> CliResult<()> {
    cfg.check_keys(KEYS)?;
    let e = core_err(CMD);
    let u = read_csv(&cfg.required("u")?)?.scalar().map_err(&e)?;
    let phi = read_csv(&cfg.required("multiplier")?)?.scalar().map_err(&e)?;
    if !u.grid().same_as(phi.grid()) {
        return Err(CliError::Config("u and the multiplier live on different grids".into()));
    }
    let m = Multiplier::from_phi(phi, cfg.f64_or("m", 1.0)?, cfg.f64_or("k", 1.0)?).map_err(&e)?;
    let exterior = if cfg.contains("exterior") { Some(cfg.pair_or("exterior", (0.0, 0.0))?) } else { None };
    let geom = match exterior {
        Some((a, r)) => Some(CutoffGeometry::new(a, r).map_err(&e)?),
        None => None,
    };
    let red = reduce(&u, &m, None, geom.as_ref().map(|g| g as &dyn Cutoff)).map_err(&e)?;
    write_complex_csv(&red.g, create(CMD, out, "g.csv")?).map_err(&e)?;
    write_complex_csv(&red.coeff, create(CMD, out, "coeff.csv")?).map_err(&e)?;
    let relative_residual = red.report.relative_residual();
    write_json(CMD, out, "report.json", &Report { exterior, relative_residual, tolerance: REDUCTION_TOL, reduction: red.report })?;
    if relative_residual > REDUCTION_TOL {
        return Err(CliError::failure(
            CMD,
            "reduction-residual",
            format!("relative ∂̄ residual {relative_residual:.3e} exceeds {REDUCTION_TOL}"),
            serde_json::json!({"relative_residual": relative_residual}),
        ));
    }
    println!("reduce: relative ∂̄ residual {relative_residual:.3e}, wrote g.csv coeff.csv report.json");
    Ok(())
}
