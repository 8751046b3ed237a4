//! CSV serialization of fields: `x,y,value` or `x,y,re,im`, row-major over the mask.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{LandisError, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::Grid;

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> LandisError {
    LandisError::Csv(e.to_string())
}

pub fn write_scalar_csv(f: &ScalarField, w: impl Write) -> Result<()> {
    let g = f.grid();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "value"]).map_err(csv_err)?;
    for k in 0..f.len() {
        let p = g.point(k);
        out.write_record([fmt_f64(p.re), fmt_f64(p.im), fmt_f64(f.get(k))]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_complex_csv(f: &ComplexField, w: impl Write) -> Result<()> {
    let g = f.grid();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "re", "im"]).map_err(csv_err)?;
    for k in 0..f.len() {
        let p = g.point(k);
        let v = f.get(k);
        out.write_record([fmt_f64(p.re), fmt_f64(p.im), fmt_f64(v.re), fmt_f64(v.im)]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Parsed CSV field; real files yield zero imaginary parts.
pub struct CsvField {
    pub grid: Arc<Grid>,
    pub values: Vec<C64>,
    pub complex: bool,
}

impl CsvField {
    pub fn scalar(&self) -> Result<ScalarField> {
        ScalarField::new(self.grid.clone(), self.values.iter().map(|v| v.re).collect())
    }

    pub fn complex_field(&self) -> Result<ComplexField> {
        ComplexField::new(self.grid.clone(), self.values.clone())
    }
}

/// Read a field CSV and recover its disc grid from the node coordinates.
pub fn read_field_csv(r: impl Read) -> Result<CsvField> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let complex = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "y", "value"] => false,
        ["x", "y", "re", "im"] => true,
        _ => return Err(LandisError::Csv(format!("unexpected header '{}'", header.join(",")))),
    };
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let nums = nums.map_err(|e| LandisError::Csv(format!("line {line}: {e}")))?;
        pts.push(C64::new(nums[0], nums[1]));
        vals.push(if complex { C64::new(nums[2], nums[3]) } else { C64::new(nums[2], 0.0) });
    }
    if pts.len() < 4 {
        return Err(LandisError::Csv("too few nodes".into()));
    }
    let mut xs: Vec<f64> = pts.iter().map(|p| p.re).collect();
    xs.sort_by(f64::total_cmp);
    let (xmin, xmax) = (xs[0], xs[xs.len() - 1]);
    let h = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 1e-12 * (xmax - xmin).max(1.0))
        .fold(f64::INFINITY, f64::min);
    if !h.is_finite() {
        return Err(LandisError::Csv("cannot infer spacing".into()));
    }
    let ymin = pts.iter().map(|p| p.im).fold(f64::INFINITY, f64::min);
    let ymax = pts.iter().map(|p| p.im).fold(f64::NEG_INFINITY, f64::max);
    let center = C64::new(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
    let radius = pts.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let grid = Arc::new(Grid::on_lattice(pts[0], h, center, radius));
    if grid.len() != pts.len() {
        return Err(LandisError::Csv(format!(
            "{} rows do not form a disc mask ({} expected)",
            pts.len(),
            grid.len()
        )));
    }
    let mut values = vec![C64::new(f64::NAN, f64::NAN); grid.len()];
    for (p, v) in pts.iter().zip(&vals) {
        let k = grid
            .nearest_node(*p)
            .filter(|&k| (grid.point(k) - p).norm() < 1e-6 * h)
            .ok_or_else(|| LandisError::Csv(format!("node ({}, {}) off lattice", p.re, p.im)))?;
        values[k] = *v;
    }
    Ok(CsvField { grid, values, complex })
}
