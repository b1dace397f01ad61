//! Objectives with analytic gradients, and their independent oracles.

mod fd;
mod lev;
mod prw;
mod sinkhorn;
mod toys;

pub use fd::{finite_diff_grad, relative_error};
pub use lev::{lev_generate, lev_value_grad, LevProblem};
pub use prw::{
    displacement_second_moment, largest_principal_angle, load_point_cloud, load_weights, prw_cost,
    prw_solve, prw_value_at, prw_value_grad, random_search, two_gaussians, two_gaussians_plane,
    PrwConfig, PrwProblem, PrwResult,
};
pub use sinkhorn::{
    marginal_residual, sinkhorn, sinkhorn_warm, SinkhornConfig, TransportPlan, LOG_DOMAIN_RATIO,
    SINKHORN_DEFAULT_MAX_ITER, SINKHORN_DEFAULT_TOL,
};
pub use toys::{Linear, Procrustes, Quadratic};
