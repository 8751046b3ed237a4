use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use landis_core::cauchy::{anchored_cauchy_transform, CauchyQuadrature};
use landis_core::field::ComplexField;
use landis_core::grid::GridSpec;
use landis_core::io::write_complex_csv;
use landis_core::ops::dbar;

use super::{core_err, create, read_csv, write_json};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &["input", "anchor", "function", "radius"];
const CMD: &str = "cauchy";

#[derive(Serialize)]
struct Report {
    source: String,
    anchor: (f64, f64),
    h: f64,
    /// sup |∂̄w + f| over nodes with a full stencil.
    dbar_residual: f64,
    f_sup: f64,
    w_sup: f64,
    /// For f ≡ 1: sup |w − (conj ẑ − conj z)|.
    closed_form_error: Option<f64>,
}

pub fn run(cfg: &Config, out: &Path) -> CliResult<()> {
    cfg.check_keys(KEYS)?;
    let e = core_err(CMD);
    let anchor = cfg.pair_or("anchor", (0.0, 0.0))?;
    let zhat = C64::new(anchor.0, anchor.1);
    let (f, source) = match cfg.str_opt("input") {
        Some(path) => (read_csv(&path)?.complex_field().map_err(&e)?, path),
        None => {
            let kind = cfg.str_or("function", "one");
            let grid = GridSpec::disc(cfg.positive_f64_or("radius", 1.0)?, cfg.grid_n_or(128)?).map_err(&e)?.build();
            let f = match kind.as_str() {
                "one" => ComplexField::constant(grid, C64::new(1.0, 0.0)),
                "wave" => ComplexField::from_fn(grid, |z| C64::new((3.0 * z.re).sin(), (2.0 * z.im).cos() * z.re)).map_err(&e)?,
                other => return Err(CliError::Config(format!("unknown function '{other}'"))),
            };
            (f, kind)
        }
    };
    let w = anchored_cauchy_transform(&f, zhat, &CauchyQuadrature::default()).map_err(&e)?;
    let d = dbar(&w);
    let mut dbar_residual = 0.0f64;
    for k in 0..w.len() {
        if d.is_valid(k) {
            dbar_residual = dbar_residual.max((d.get(k) + f.get(k)).norm());
        }
    }
    let closed_form_error = (source == "one").then(|| {
        let g = w.grid();
        (0..w.len())
            .map(|k| (w.get(k) - (zhat.conj() - g.point(k).conj())).norm())
            .fold(0.0, f64::max)
    });
    if !dbar_residual.is_finite() || !w.sup().is_finite() {
        return Err(CliError::failure(CMD, "finite", "transform produced non-finite values", serde_json::Value::Null));
    }
    write_complex_csv(&w, create(CMD, out, "w.csv")?).map_err(&e)?;
    let report = Report {
        source,
        anchor,
        h: w.grid().h(),
        dbar_residual,
        f_sup: f.sup(),
        w_sup: w.sup(),
        closed_form_error,
    };
    write_json(CMD, out, "report.json", &report)?;
    println!("cauchy: ‖∂̄w + f‖ = {dbar_residual:.3e}, wrote w.csv report.json");
    Ok(())
}
