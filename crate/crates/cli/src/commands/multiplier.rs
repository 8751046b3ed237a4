use std::path::Path;

use serde::Serialize;

use landis_core::grid::GridSpec;
use landis_core::io::{fmt_f64, write_scalar_csv};
use landis_core::multiplier::{build_multiplier, lipschitz_constant, BuildOptions, BuildReport};
use landis_core::potential::{zero_drift, PotentialPair};

use super::{core_err, create, read_csv, write_json};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &["potential", "m", "k", "v", "w1", "w2", "w_max", "potential_csv", "radius", "max_sweeps"];
const CMD: &str = "multiplier";

#[derive(Serialize)]
struct Report {
    potential: String,
    m: f64,
    k: f64,
    lambda: f64,
    seed: u64,
    grid_n: usize,
    h: f64,
    phi_min: f64,
    phi_max: f64,
    lower_bound: f64,
    upper_bound: f64,
    sandwich: bool,
    /// Residual of φ̂ = φe^{−λρ} against the bound 10·tol/h².
    residual: f64,
    residual_bound: f64,
    lipschitz: f64,
    build: Option<BuildReport>,
}

pub fn run(cfg: &Config, out: &Path) -> CliResult<()> {
    cfg.check_keys(KEYS)?;
    let e = core_err(CMD);
    let n = cfg.grid_n_or(128)?;
    let tol = cfg.tol_or(1e-10)?;
    let seed = cfg.u64_or("seed", 0)?;
    let radius = cfg.positive_f64_or("radius", 2.0)?;
    let m = cfg.f64_or("m", 1.0)?;
    let k = cfg.f64_or("k", 1.0)?;
    let kind = cfg.str_or("potential", "random");
    let pot = match kind.as_str() {
        "constant" => {
            let grid = GridSpec::disc(radius, n).map_err(&e)?.build();
            let w = (cfg.f64_or("w1", 0.0)?, cfg.f64_or("w2", 0.0)?);
            PotentialPair::constant(grid, cfg.f64_or("v", m)?, w, m, k).map_err(&e)?
        }
        "half-plane" => PotentialPair::half_plane(GridSpec::disc(radius, n).map_err(&e)?.build(), m, k).map_err(&e)?,
        "random" => {
            let grid = GridSpec::disc(radius, n).map_err(&e)?.build();
            PotentialPair::random(grid, m, k, cfg.f64_or("w_max", 0.0)?, seed).map_err(&e)?
        }
        "csv" => {
            let v = read_csv(&cfg.required("potential_csv")?)?.scalar().map_err(&e)?;
            let grid = v.grid().clone();
            PotentialPair::new(v, zero_drift(&grid), m, k).map_err(&e)?
        }
        other => return Err(CliError::Config(format!("unknown potential '{other}'"))),
    };
    let opts = BuildOptions { tol, max_sweeps: cfg.usize_or("max_sweeps", BuildOptions::default().max_sweeps)? };
    let mult = build_multiplier(&pot, opts).map_err(&e)?;

    let grid = pot.grid().clone();
    let h = grid.h();
    let lambda = pot.lambda();
    let rho = grid.radius();
    let (lower_bound, upper_bound) = ((-lambda * rho).exp(), (lambda * rho).exp());
    let phi_min = mult.phi.values().iter().copied().fold(f64::INFINITY, f64::min);
    let phi_max = mult.phi.values().iter().copied().fold(0.0, f64::max);
    let slack = 1.0 + 1e-12;
    let sandwich = phi_min * slack >= lower_bound && phi_max <= upper_bound * slack;
    let residual = mult.report.as_ref().map_or(0.0, |r| r.residual);
    let residual_bound = 10.0 * tol / (h * h);
    let lip_r = if rho > 1.4 { 1.4 } else { 0.7 * rho };
    let lipschitz = lipschitz_constant(&mult, lip_r).map_err(&e)?;

    write_scalar_csv(&mult.phi, create(CMD, out, "phi.csv")?).map_err(&e)?;
    write_scalar_csv(&mult.psi, create(CMD, out, "psi.csv")?).map_err(&e)?;
    let report = Report {
        potential: kind,
        m,
        k,
        lambda,
        seed,
        grid_n: n,
        h,
        phi_min,
        phi_max,
        lower_bound,
        upper_bound,
        sandwich,
        residual,
        residual_bound,
        lipschitz,
        build: mult.report.clone(),
    };
    write_json(CMD, out, "report.json", &report)?;
    if !sandwich {
        return Err(CliError::failure(
            CMD,
            "sandwich",
            format!("φ range [{}, {}] leaves [{}, {}]", fmt_f64(phi_min), fmt_f64(phi_max), fmt_f64(lower_bound), fmt_f64(upper_bound)),
            serde_json::json!({"phi_min": phi_min, "phi_max": phi_max, "lower": lower_bound, "upper": upper_bound}),
        ));
    }
    if residual > residual_bound {
        return Err(CliError::failure(
            CMD,
            "residual",
            format!("residual {} exceeds 10·tol/h² = {}", fmt_f64(residual), fmt_f64(residual_bound)),
            serde_json::json!({"residual": residual, "bound": residual_bound}),
        ));
    }
    println!("multiplier: λ = {lambda}, φ ∈ [{phi_min:.6e}, {phi_max:.6e}], wrote phi.csv psi.csv report.json");
    Ok(())
}
