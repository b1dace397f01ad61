//! Discrete optimizers on St(n, m) and SO(n).

mod adam;
mod cayley_gd;
mod groups;
mod hyper;
mod run;
mod sgd;
mod snapshot;
mod son;

pub use adam::{adam_step, adam_update, AdamState};
pub use cayley_gd::momentumless_cayley_step;
pub use groups::{Geometry, GroupMethod, JointOracle, MixedHyper, MixedOptimizer};
pub use hyper::{
    AdamHyper, OptimizerKind, Phi1Mode, Phi2Mode, Precision, Rescaling, SgdHyper, SplitMap,
    ADAM_DEFAULT_BETA1, ADAM_DEFAULT_BETA2, ADAM_DEFAULT_EPS, ADAM_DEFAULT_ETA, DEFAULT_ORDER,
    DEFAULT_SKEW_SCRUB_EVERY,
};
pub use run::{
    run, Adam, AnyOptimizer, CayleyGd, GradientOracle, NoisyOracle, Objective, RunFailure, Sgd,
    SonAdam, SonSgd, StiefelOptimizer, Trace, TraceRow, TRACE_HEADER,
};
pub use sgd::{phi1_tilde, phi2_bar, phi3_bar, sgd_step, sgd_update, SgdState};
pub use son::{son_adam_step, son_adam_update, son_sgd_step, son_sgd_update, SonState};
