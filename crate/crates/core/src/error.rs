use thiserror::Error;

#[derive(Debug, Error)]
pub enum LandisError {
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("empty disc intersection: center ({0}, {1}), radius {2}")]
    EmptyDisc(f64, f64, f64),
    #[error("point ({0}, {1}) is outside the grid")]
    OutsideGrid(f64, f64),
    #[error("grids differ")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("negative potential {value:e} at node {node}")]
    NegativePotential { node: usize, value: f64 },
    #[error("no convergence after {iterations} sweeps (last relative change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LandisError>;
