//! Matrix square root and inverse square root of small SPD matrices.

use super::Matrix;
use crate::error::{Error, Result};

pub const NS_DEFAULT_TOL: f64 = 1e-14;
pub const NS_DEFAULT_MAX_ITER: usize = 20;

/// Output of the coupled Newton–Schulz iteration.
#[derive(Clone, Debug)]
pub struct RootPair {
    pub sqrt: Matrix,
    pub inv_sqrt: Matrix,
    pub iters: usize,
    /// `‖Y_k² − A‖_F` for `k = 0..=iters`.
    pub residuals: Vec<f64>,
}

/// Coupled Newton–Schulz iteration for `A^{1/2}` and `A^{-1/2}`:
///
/// ```text
/// Y_0 = A, Z_0 = I
/// Y_{k+1} = ½ Y_k (3I − Z_k Y_k)
/// Z_{k+1} = ½ (3I − Z_k Y_k) Z_k
/// ```
///
/// stopping once `‖Y_k² − A‖_F < tol`. Converges when the spectrum of `A − I`
/// lies strictly inside the unit disc. If `tol` sits below the rounding floor
/// of the product `Y_k²`, the loop also stops once the residual stagnates at
/// that floor. Growth of the residual on two consecutive iterations, or
/// exhausting `max_iter`, is reported as [`Error::Diverged`].
pub fn inv_sqrt_newton_schulz(a: &Matrix, tol: f64, max_iter: usize) -> Result<RootPair> {
    check_symmetric(a)?;
    let m = a.rows();
    let eye = Matrix::identity(m);
    let floor = 16.0 * f64::EPSILON * (m as f64) * a.frobenius_norm().max(1.0);

    let mut y = a.clone();
    let mut z = eye.clone();
    let mut res = residual(&y, a);
    let mut residuals = vec![res];
    let mut growth = 0;
    let mut iters = 0;

    while res >= tol {
        if iters == max_iter {
            return Err(Error::Diverged {
                iters,
                residual: res,
            });
        }
        let t = &eye.scale(3.0) - &z.matmul(&y);
        y = y.matmul(&t).scale(0.5);
        z = t.matmul(&z).scale(0.5);
        iters += 1;

        let next = residual(&y, a);
        residuals.push(next);
        if !next.is_finite() {
            return Err(Error::Diverged {
                iters,
                residual: next,
            });
        }
        if next > res {
            growth += 1;
            if growth >= 2 {
                return Err(Error::Diverged {
                    iters,
                    residual: next,
                });
            }
        } else {
            growth = 0;
        }
        let stagnated = next <= floor && next >= 0.5 * res;
        res = next;
        if stagnated {
            break;
        }
    }

    Ok(RootPair {
        sqrt: y,
        inv_sqrt: z,
        iters,
        residuals,
    })
}

fn residual(y: &Matrix, a: &Matrix) -> f64 {
    (&y.matmul(y) - a).frobenius_norm()
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    a.ensure_finite("matrix root input")?;
    let asym = a.sym_residual();
    if asym > 1e-12 * a.frobenius_norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "matrix root input is not symmetric (‖A − Aᵀ‖ = {asym:e})"
        )));
    }
    Ok(())
}

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut d = a.sym_part();
    let mut v = Matrix::identity(n);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| d[(i, j)] * d[(i, j)])
            .sum();
        if off.sqrt() <= f64::EPSILON * d.frobenius_norm() * 1e-2 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = d[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (d[(q, q)] - d[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let dkp = d[(k, p)];
                    let dkq = d[(k, q)];
                    d[(k, p)] = c * dkp - s * dkq;
                    d[(k, q)] = s * dkp + c * dkq;
                }
                for k in 0..n {
                    let dpk = d[(p, k)];
                    let dqk = d[(q, k)];
                    d[(p, k)] = c * dpk - s * dqk;
                    d[(q, k)] = s * dpk + c * dqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[(i, i)].total_cmp(&d[(j, j)]));
    let values = order.iter().map(|&i| d[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// `A^{1/2}` and `A^{-1/2}` through the Jacobi eigendecomposition.
pub fn sqrt_pair_eigen(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (vals, vecs) = symmetric_eigen(a)?;
    if vals.iter().any(|&l| l <= 0.0) {
        return Err(Error::Singular("matrix is not positive definite"));
    }
    let root: Vec<f64> = vals.iter().map(|l| l.sqrt()).collect();
    let inv: Vec<f64> = root.iter().map(|r| 1.0 / r).collect();
    let rebuild = |diag: &[f64]| vecs.matmul(&Matrix::from_diag(diag)).matmul_t(&vecs);
    Ok((rebuild(&root), rebuild(&inv)))
}

/// Settings for the inverse square root used by the polar retraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self {
            tol: NS_DEFAULT_TOL,
            max_iter: NS_DEFAULT_MAX_ITER,
        }
    }
}

/// `A^{-1/2}` by Newton–Schulz, falling back to Jacobi when the iteration
/// diverges.
pub fn inv_sqrt_spd(a: &Matrix, cfg: RootConfig) -> Result<Matrix> {
    match inv_sqrt_newton_schulz(a, cfg.tol, cfg.max_iter) {
        Ok(pair) => Ok(pair.inv_sqrt),
        Err(Error::Diverged { .. }) => sqrt_pair_eigen(a).map(|(_, inv)| inv),
        Err(e) => Err(e),
    }
}

/// Polar retraction `X (XᵀX)^{-1/2}`.
pub fn polar_retract(x: &Matrix, cfg: RootConfig) -> Result<Matrix> {
    let gram = x.t_matmul(x).sym_part();
    Ok(x.matmul(&inv_sqrt_spd(&gram, cfg)?))
}
