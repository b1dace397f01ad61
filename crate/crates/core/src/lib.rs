//! Structure-preserving momentum optimizers on the Stiefel manifold
//! St(n, m) = { X ∈ ℝ^{n×m} : XᵀX = I }.
//!
//! * [`linalg`]: dense kernels, matrix roots, `expm`, Cayley, initialisation.
//! * [`manifold`]: metric, tangent decomposition, gradient terms, diagnostics.
//! * [`optimizers`]: momentum SGD, Adam, SO(n) variants, a Cayley baseline.
//! * [`dynamics`]: the continuous dynamics used as a correctness oracle.
//! * [`problems`]: leading eigenvalues, projection robust Wasserstein, toys.

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod optimizers;
pub mod problems;

pub use error::{Error, Result};
pub use linalg::{Matrix, Rng};
pub use manifold::{MetricParams, StiefelPoint};
