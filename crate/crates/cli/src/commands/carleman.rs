use std::path::Path;

use rayon::prelude::*;

use landis_core::exterior::{carleman_verify, random_test_function, CarlemanCheck};
use landis_core::grid::GridSpec;

use super::{core_err, Cell, Csv};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &["taus", "count", "slack"];
const CMD: &str = "carleman";

pub fn run(cfg: &Config, out: &Path) -> CliResult<()> {
    cfg.check_keys(KEYS)?;
    let e = core_err(CMD);
    let taus = cfg.list_or::<f64>("taus", &[10.0, 20.0, 40.0])?;
    let count = cfg.usize_or("count", 50)?;
    let seed = cfg.u64_or("seed", 0)?;
    let slack = cfg.positive_f64_or("slack", 20.0)?;
    let grid = GridSpec::disc(1.5, cfg.grid_n_or(256)?).map_err(&e)?.build();
    let h = grid.h();
    let floor = 1.0 - slack * h;

    let rows: Vec<(u64, Vec<CarlemanCheck>)> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let f = random_test_function(&grid, s)?;
            let checks = taus.iter().map(|&t| carleman_verify(&f, t)).collect::<Result<Vec<_>, _>>()?;
            Ok((s, checks))
        })
        .collect::<Result<_, landis_core::LandisError>>()
        .map_err(&e)?;

    let mut csv = Csv::new(CMD, out, "carleman.csv", &["seed", "tau", "log_lhs", "log_rhs", "ratio"])?;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (s, checks) in &rows {
        for (&tau, c) in taus.iter().zip(checks) {
            csv.row(&[Cell::I(*s as i64), Cell::F(tau), Cell::F(c.log_lhs), Cell::F(c.log_rhs), Cell::F(c.ratio)])?;
            worst = worst.min(c.ratio);
            if !(c.ratio >= floor) {
                failures.push(serde_json::json!({"seed": s, "tau": tau, "ratio": c.ratio, "floor": floor}));
            }
        }
    }
    csv.finish()?;
    println!("carleman: {} functions × {} weights, min lhs/rhs = {worst:.6}", rows.len(), taus.len());
    if !failures.is_empty() {
        return Err(CliError::failure(CMD, "carleman-ratio", format!("{} ratio(s) below 1 − {slack}h", failures.len()), serde_json::Value::Array(failures)));
    }
    Ok(())
}
