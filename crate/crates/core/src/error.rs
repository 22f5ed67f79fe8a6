use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver did not converge within its iteration cap")]
    EigenNonConvergence,

    #[error("operator Sinkhorn scaling did not converge after {sweeps} sweeps (last residual {residual:e})")]
    SinkhornNonConvergence { sweeps: usize, residual: f64 },

    #[error("isometry condition violated: ||sum V_i^* V_i - I||_F = {0:e}")]
    Isometry(f64),

    #[error("graph is not regular (degrees {0:?})")]
    NotRegular(Vec<usize>),

    #[error("numerical rank trouble: {0}")]
    RankMismatch(String),

    #[error("point is not in the affine slice (residual {0:e})")]
    AffineInfeasible(f64),

    #[error("sdp solver: {0}")]
    Sdp(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
