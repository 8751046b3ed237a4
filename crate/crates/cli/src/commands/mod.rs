//! One module per subcommand. Each reads its keys from the merged config,
//! writes artifacts into the output directory and checks its invariants.

pub mod carleman;
pub mod cauchy;
pub mod exterior;
pub mod multiplier;
pub mod order;
pub mod reduce;
pub mod scale;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use landis_core::io::{fmt_f64, read_field_csv, CsvField};

use crate::error::{CliError, CliResult};

pub(crate) fn core_err(cmd: &'static str) -> impl Fn(landis_core::LandisError) -> CliError {
    move |e| CliError::from_core(cmd, e)
}

pub(crate) fn read_csv(path: &str) -> CliResult<CsvField> {
    let f = File::open(path).map_err(|e| CliError::Config(format!("cannot open {path}: {e}")))?;
    read_field_csv(f).map_err(|e| CliError::Config(format!("{path}: {e}")))
}

fn io_failure(cmd: &str, e: std::io::Error) -> CliError {
    CliError::failure(cmd, "output", e.to_string(), serde_json::Value::Null)
}

pub(crate) fn write_json(cmd: &str, out: &Path, name: &str, value: &impl Serialize) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::failure(cmd, "output", e.to_string(), serde_json::Value::Null))?;
    std::fs::write(out.join(name), s + "\n").map_err(|e| io_failure(cmd, e))
}

pub(crate) fn create(cmd: &str, out: &Path, name: &str) -> CliResult<BufWriter<File>> {
    File::create(out.join(name)).map(BufWriter::new).map_err(|e| io_failure(cmd, e))
}

/// Table writer: floats with 17 significant digits.
pub(crate) struct Csv {
    cmd: &'static str,
    w: csv::Writer<BufWriter<File>>,
}

pub(crate) enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

fn csv_failure(cmd: &str, e: csv::Error) -> CliError {
    CliError::failure(cmd, "output", e.to_string(), serde_json::Value::Null)
}

impl Csv {
    pub fn new(cmd: &'static str, out: &Path, name: &str, header: &[&str]) -> CliResult<Self> {
        let mut w = csv::Writer::from_writer(create(cmd, out, name)?);
        w.write_record(header).map_err(|e| csv_failure(cmd, e))?;
        Ok(Self { cmd, w })
    }

    pub fn row(&mut self, cells: &[Cell]) -> CliResult<()> {
        let rec = cells.iter().map(|c| match c {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        });
        self.w.write_record(rec).map_err(|e| csv_failure(self.cmd, e))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.w.flush().map_err(|e| io_failure(self.cmd, e))
    }
}
