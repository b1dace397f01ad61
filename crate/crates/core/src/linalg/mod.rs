//! Dense small-matrix kernels: products, norms, matrix roots, the matrix
//! exponential, the Cayley map and orthogonal initialisation.

mod expm;
mod init;
mod matrix;
mod rng;
mod roots;

pub use expm::{cayley, cayley_general, expm, expm_skew};
pub use init::{householder_qr, orthogonal_init};
pub use matrix::{Lu, Matrix};
pub use rng::Rng;
pub use roots::{
    inv_sqrt_newton_schulz, inv_sqrt_spd, polar_retract, sqrt_pair_eigen, symmetric_eigen,
    RootConfig, RootPair, NS_DEFAULT_MAX_ITER, NS_DEFAULT_TOL,
};

/// `(A − Aᵀ)/2`.
pub fn skew_part(a: &Matrix) -> Matrix {
    a.skew_part()
}
