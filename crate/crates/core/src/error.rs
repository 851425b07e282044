use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} must be even and at least 8")]
    InvalidGridSize(usize),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("grid size mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("derivative order {0} is not supported (expected 1, 2 or 3)")]
    InvalidOrder(u32),

    #[error("lift is not strictly increasing: min slope {min_slope:e} <= floor {floor:e}")]
    SlopeCollapse { min_slope: f64, floor: f64 },

    #[error("inversion did not converge at node {node}: residual {residual:e}")]
    InversionFailed { node: usize, residual: f64 },

    #[error("conjugated linear solve failed: {reason}")]
    LinearSolve { reason: String },

    #[error("trajectory snapshots are too sparse for time quadrature: {0}")]
    SparseSnapshots(String),

    #[error("no snapshot at t = {0}")]
    MissingSnapshot(f64),

    #[error("flow left the domain before t = {t_target}: {reason}")]
    OutOfDomain { t_target: f64, reason: String },

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
