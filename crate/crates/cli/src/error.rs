use std::path::Path;

use serde::Serialize;

use landis_core::LandisError;

/// Machine-readable record of a violated invariant (exit code 1).
#[derive(Clone, Debug, Serialize)]
pub struct FailureReport {
    pub command: String,
    pub invariant: String,
    pub detail: String,
    pub values: serde_json::Value,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad config or arguments: exit 2.
    Config(String),
    /// Pipeline ran but an invariant failed: exit 1.
    Failure(FailureReport),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failure(_) => 1,
        }
    }

    pub fn failure(command: &str, invariant: &str, detail: impl Into<String>, values: serde_json::Value) -> Self {
        CliError::Failure(FailureReport {
            command: command.into(),
            invariant: invariant.into(),
            detail: detail.into(),
            values,
        })
    }

    /// Library errors: argument and data problems are config errors, the rest are failures.
    pub fn from_core(command: &str, e: LandisError) -> Self {
        match e {
            LandisError::InvalidArgument(_) | LandisError::Csv(_) | LandisError::Io(_) => {
                CliError::Config(e.to_string())
            }
            other => {
                let invariant = match &other {
                    LandisError::NoConvergence { .. } => "convergence",
                    LandisError::NegativePotential { .. } => "nonnegative-potential",
                    LandisError::GridTooCoarse(_) | LandisError::InvalidGrid(_) => "resolution",
                    LandisError::Precondition(_) => "precondition",
                    _ => "invariant",
                };
                Self::failure(command, invariant, other.to_string(), serde_json::Value::Null)
            }
        }
    }

    /// Writes `failure.json` next to the other artifacts when the directory exists.
    pub fn write_report(&self, out: &Path) {
        if let CliError::Failure(r) = self {
            if out.is_dir() {
                if let Ok(s) = serde_json::to_string_pretty(r) {
                    let _ = std::fs::write(out.join("failure.json"), s + "\n");
                }
            }
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Failure(r) => match serde_json::to_string(r) {
                Ok(s) => write!(f, "{s}"),
                Err(_) => write!(f, "{}: {}", r.invariant, r.detail),
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
