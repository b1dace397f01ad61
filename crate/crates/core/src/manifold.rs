//! Stiefel geometry: the canonical-type metric family, the (Y, V) tangent
//! decomposition, the two gradient terms consumed by the optimizers, and
//! structure diagnostics.
//!
//! A tangent vector `Q` at `X` is written `Q = XY + V` with `Y` skew-symmetric
//! (`m x m`, the rotation inside span(X)) and `V` orthogonal to `X`
//! (`XᵀV = 0`, the component leaving span(X)).

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Tolerance used when building a [`StiefelPoint`] through the checked constructor.
pub const FEASIBILITY_TOL: f64 = 1e-8;
const TANGENT_TOL: f64 = 1e-8;

/// Parameter `a < 1` of the metric `g_X(D1, D2) = Tr(D1ᵀ (I − a XXᵀ) D2)`.
///
/// `a = 0` is the Euclidean metric, `a = 1/2` the canonical metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricParams {
    a: f64,
}

impl MetricParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a < 1.0) || !a.is_finite() {
            return Err(Error::InvalidInput(format!("metric parameter a must be < 1, got {a}")));
        }
        Ok(Self { a })
    }

    pub fn euclidean() -> Self {
        Self { a: 0.0 }
    }

    pub fn canonical() -> Self {
        Self { a: 0.5 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `b = a / (a − 1)`.
    pub fn b(&self) -> f64 {
        self.a / (self.a - 1.0)
    }
}

impl Default for MetricParams {
    fn default() -> Self {
        Self::canonical()
    }
}

/// A point `X` with (approximately) orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelPoint {
    x: Matrix,
}

impl StiefelPoint {
    /// Accepts `x` if `‖XᵀX − I‖_F <= 1e-8`.
    pub fn new(x: Matrix) -> Result<Self> {
        if x.rows() < x.cols() {
            return Err(Error::DimensionMismatch(format!(
                "Stiefel point must be tall, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        let feas = feasibility(&x);
        if !(feas <= FEASIBILITY_TOL) {
            return Err(Error::NotFeasible(feas));
        }
        Ok(Self { x })
    }

    /// Skips the feasibility check. The optimizers re-orthonormalise on their
    /// first step, so any full-rank start is usable.
    pub fn new_unchecked(x: Matrix) -> Self {
        Self { x }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn into_matrix(self) -> Matrix {
        self.x
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn m(&self) -> usize {
        self.x.cols()
    }

    pub fn feasibility(&self) -> f64 {
        feasibility(&self.x)
    }

    /// `(I − XXᵀ) A`, computed as `A − X(XᵀA)`.
    pub fn project_perp(&self, a: &Matrix) -> Matrix {
        a - &self.x.matmul(&self.x.t_matmul(a))
    }
}

/// Tangent vector in `(Y, V)` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentYV {
    pub y: Matrix,
    pub v: Matrix,
}

impl TangentYV {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            y: Matrix::zeros(m, m),
            v: Matrix::zeros(n, m),
        }
    }
}

/// `Tr(D1ᵀ (I − a XXᵀ) D2)`.
pub fn metric_inner(x: &StiefelPoint, d1: &Matrix, d2: &Matrix, mp: MetricParams) -> Result<f64> {
    let shape = x.matrix().shape();
    if d1.shape() != shape || d2.shape() != shape {
        return Err(Error::DimensionMismatch(format!(
            "metric_inner: X is {:?}, D1 {:?}, D2 {:?}",
            shape,
            d1.shape(),
            d2.shape()
        )));
    }
    let xm = x.matrix();
    let euclid = d1.dot(d2);
    let inner = xm.t_matmul(d1).dot(&xm.t_matmul(d2));
    Ok(euclid - mp.a() * inner)
}

/// Splits a tangent matrix into `Y = XᵀQ` and `V = Q − XY`.
pub fn decompose_tangent(x: &StiefelPoint, q: &Matrix) -> Result<TangentYV> {
    if q.shape() != x.matrix().shape() {
        return Err(Error::DimensionMismatch(format!(
            "decompose_tangent: X is {:?}, Q is {:?}",
            x.matrix().shape(),
            q.shape()
        )));
    }
    let y = x.matrix().t_matmul(q);
    let r = y.skew_residual();
    if r > TANGENT_TOL * q.frobenius_norm().max(1.0) {
        return Err(Error::NotTangent(r));
    }
    let v = q - &x.matrix().matmul(&y);
    Ok(TangentYV { y, v })
}

/// `Q = XY + V`.
pub fn compose_tangent(x: &StiefelPoint, t: &TangentYV) -> Matrix {
    &x.matrix().matmul(&t.y) + &t.v
}

/// The two "gradient" terms of one optimizer step:
///
/// ```text
/// fY = (1 − b)/2 · (XᵀG − GᵀX)      (skew, m x m)
/// gV = (I − XXᵀ) G                   (n x m, orthogonal to X)
/// ```
///
/// `fY` is formed as `c·(M − Mᵀ)` from a single product `M = XᵀG`, so it is
/// skew-symmetric bit for bit. For square `X` the complement of its column
/// span is trivial and `gV` is returned as exact zeros.
pub fn gradient_terms(x: &Matrix, g: &Matrix, mp: MetricParams) -> (Matrix, Matrix) {
    assert_eq!(x.shape(), g.shape(), "gradient_terms: X and G shapes differ");
    let xtg = x.t_matmul(g);
    let c = 0.5 * (1.0 - mp.b());
    let m = xtg.rows();
    let f = Matrix::from_fn(m, m, |i, j| c * (xtg[(i, j)] - xtg[(j, i)]));
    let gv = if x.is_square() { Matrix::zeros(x.rows(), m) } else { g - &x.matmul(&xtg) };
    (f, gv)
}

/// Raw constraint residuals of an `(X, Z, U)` triple.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StructureErrors {
    /// `‖XᵀX − I‖_F`
    pub feas: f64,
    /// `‖Z + Zᵀ‖_F`
    pub skew: f64,
    /// `‖XᵀU‖_F`
    pub perp: f64,
}

impl StructureErrors {
    pub fn max_with(self, other: StructureErrors) -> StructureErrors {
        StructureErrors {
            feas: self.feas.max(other.feas),
            skew: self.skew.max(other.skew),
            perp: self.perp.max(other.perp),
        }
    }
}

pub fn structure_errors(x: &Matrix, z: &Matrix, u: &Matrix) -> StructureErrors {
    StructureErrors {
        feas: feasibility(x),
        skew: z.skew_residual(),
        perp: x.t_matmul(u).frobenius_norm(),
    }
}

/// `‖XᵀX − I‖_F`.
pub fn feasibility(x: &Matrix) -> f64 {
    (&x.t_matmul(x) - &Matrix::identity(x.cols())).frobenius_norm()
}
