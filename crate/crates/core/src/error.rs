use thiserror::Error;

use crate::problems::TransportPlan;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Newton-Schulz iteration diverged after {iters} iterations (residual {residual:e})")]
    Diverged { iters: usize, residual: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("Gaussian draw was numerically rank deficient")]
    RankDeficient,

    #[error("matrix is not a tangent vector (skew residual {0:e})")]
    NotTangent(f64),

    #[error("point is not on the Stiefel manifold (feasibility residual {0:e})")]
    NotFeasible(f64),

    #[error("Sinkhorn hit {iters} iterations with marginal residual {residual:e}")]
    SinkhornMaxIter {
        iters: usize,
        residual: f64,
        plan: Box<TransportPlan>,
    },

    #[error("order fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
