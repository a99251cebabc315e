use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mollifier level j = {j} needs width 1/j >= {min_width} (h = {spacing}); refine the grid")]
    Unresolvable { j: usize, min_width: f64, spacing: f64 },
    #[error("CFL violation: dt = {dt} exceeds h/(4 max|u|) = {max_dt}; use dt <= {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },
    #[error("indices fail Condition A: {0}")]
    Inadmissible(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("Picard iteration diverged after {} iterations at T = {}", .0.iterates.len(), .0.horizon)]
    Diverged(Box<crate::picard::PicardReport>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
