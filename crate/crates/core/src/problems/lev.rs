use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::optimizers::GradientOracle;

/// Leading-eigenvalue problem: maximise `Tr(XᵀAX)` over St(n, m), posed as
/// minimising `f(X) = −Tr(XᵀAX)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevProblem {
    a: Matrix,
    m: usize,
}

impl LevProblem {
    pub fn new(a: Matrix, m: usize) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!("A is {:?}", a.shape())));
        }
        if m == 0 || m > a.rows() {
            return Err(Error::InvalidInput(format!("need 1 <= m <= n, got m={m}, n={}", a.rows())));
        }
        let asym = a.sym_residual();
        if asym > 1e-12 {
            return Err(Error::InvalidInput(format!("A is not symmetric (‖A − Aᵀ‖ = {asym:e})")));
        }
        a.ensure_finite("A")?;
        Ok(Self { a, m })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Sum of the `m` largest eigenvalues of `A`, from a dense symmetric
    /// eigendecomposition. `−top_eigen_sum()` is the global minimum of `f`.
    pub fn top_eigen_sum(&self) -> f64 {
        let n = self.n();
        let dense = DMatrix::from_row_slice(n, n, self.a.as_slice());
        let mut eig: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        eig[..self.m].iter().sum()
    }

    /// `top_eigen_sum() − Tr(XᵀAX)`; nonnegative on St(n, m).
    pub fn gap(&self, x: &Matrix, top: f64) -> f64 {
        top + lev_value_grad(self, x).map(|(f, _)| f).unwrap_or(f64::NAN)
    }
}

/// `A = (Ξ + Ξᵀ)/2/√n` for a Gaussian `Ξ`; symmetric to the last bit.
pub fn lev_generate(n: usize, m: usize, rng: &mut Rng) -> Result<LevProblem> {
    if m == 0 || n < m {
        return Err(Error::InvalidInput(format!("need n >= m >= 1, got n={n}, m={m}")));
    }
    let xi = rng.gaussian_matrix(n, n);
    let s = 0.5 / (n as f64).sqrt();
    let a = Matrix::from_fn(n, n, |i, j| (xi[(i, j)] + xi[(j, i)]) * s);
    LevProblem::new(a, m)
}

/// `(−Tr(XᵀAX), −2AX)`.
pub fn lev_value_grad(p: &LevProblem, x: &Matrix) -> Result<(f64, Matrix)> {
    if x.rows() != p.n() {
        return Err(Error::DimensionMismatch(format!("X is {:?} for n = {}", x.shape(), p.n())));
    }
    let ax = p.a.matmul(x);
    Ok((-x.dot(&ax), ax.scale(-2.0)))
}

impl GradientOracle for LevProblem {
    fn gradient(&mut self, x: &Matrix) -> Matrix {
        self.a.matmul(x).scale(-2.0)
    }

    fn value(&mut self, x: &Matrix) -> f64 {
        -x.dot(&self.a.matmul(x))
    }
}

impl GradientOracle for &LevProblem {
    fn gradient(&mut self, x: &Matrix) -> Matrix {
        self.a.matmul(x).scale(-2.0)
    }

    fn value(&mut self, x: &Matrix) -> f64 {
        -x.dot(&self.a.matmul(x))
    }
}
