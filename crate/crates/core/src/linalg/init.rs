use super::{Matrix, Rng};
use crate::error::{Error, Result};

/// Thin Householder QR of an `n x m` matrix (`n >= m`).
///
/// Returns `(Q, diag(R))` with `Q` having orthonormal columns.
pub fn householder_qr(a: &Matrix) -> (Matrix, Vec<f64>) {
    let (n, m) = a.shape();
    assert!(n >= m, "QR needs rows >= cols");
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(m);

    for k in 0..m {
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        let alpha = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let alpha = if v[0] > 0.0 { -alpha } else { alpha };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            v.iter_mut().for_each(|x| *x /= vnorm);
            for j in k..m {
                let dot: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum();
                for i in k..n {
                    r[(i, j)] -= 2.0 * v[i - k] * dot;
                }
            }
        }
        reflectors.push(v);
    }

    let mut q = Matrix::from_fn(n, m, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..m).rev() {
        let v = &reflectors[k];
        for j in 0..m {
            let dot: f64 = (k..n).map(|i| v[i - k] * q[(i, j)]).sum();
            if dot != 0.0 {
                for i in k..n {
                    q[(i, j)] -= 2.0 * v[i - k] * dot;
                }
            }
        }
    }
    let diag = (0..m).map(|k| r[(k, k)]).collect();
    (q, diag)
}

/// Random point on St(n, m): QR of a Gaussian matrix with the column signs of
/// `Q` flipped to match `sign(diag R)`. The result is distributed uniformly
/// (Haar) on the Stiefel manifold.
pub fn orthogonal_init(n: usize, m: usize, rng: &mut Rng) -> Result<Matrix> {
    if n < m || m == 0 {
        return Err(Error::InvalidInput(format!(
            "orthogonal_init needs n >= m >= 1, got n={n}, m={m}"
        )));
    }
    for _attempt in 0..2 {
        let g = rng.gaussian_matrix(n, m);
        let (mut q, diag) = householder_qr(&g);
        let scale = g.frobenius_norm();
        if diag.iter().any(|d| d.abs() <= 1e-10 * scale) {
            continue;
        }
        for (j, d) in diag.iter().enumerate() {
            if *d < 0.0 {
                for i in 0..n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        return Ok(q);
    }
    Err(Error::RankDeficient)
}
