use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid cost matrix: {0}")]
    CostMatrix(String),
    #[error("malformed cone: {0}")]
    MalformedCone(String),
    #[error("position is not in the solvency cone (slack {slack:.3e})")]
    NotInCone { slack: f64 },
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("projection did not converge within {0} iterations")]
    ProjectionStalled(usize),
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("invalid path: {0}")]
    Path(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("nonpositive price {0}")]
    NonPositivePrice(f64),
    #[error("strategy increment at node {node} leaves -K")]
    NotDecreasing { node: usize },
    #[error("strategy is inadmissible at node {node}")]
    Inadmissible { node: usize },
    #[error("negative liquidation value {value:.3e} at repair time node {node}; margin too small")]
    RepairFailed { node: usize, value: f64 },
    #[error("invalid utility: {0}")]
    Utility(String),
    #[error("{what} exceeds budget: {size} > {limit}")]
    Budget { what: &'static str, size: u128, limit: u128 },
    #[error("no admissible action profile from the initial position")]
    NoAdmissibleProfile,
    #[error("solvency cone is not proper; the epsilon-interior of K* is empty")]
    ImproperCone,
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::CostMatrix(_) | Error::Model(_) | Error::Utility(_) => 2,
            Error::Budget { .. } => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
