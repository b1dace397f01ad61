use crate::linalg::Matrix;

/// Central-difference gradient, entry by entry.
pub fn finite_diff_grad(mut f: impl FnMut(&Matrix) -> f64, x: &Matrix, h: f64) -> Matrix {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    Matrix::from_fn(x.rows(), x.cols(), |i, j| {
        let x0 = probe[(i, j)];
        probe[(i, j)] = x0 + h;
        let fp = f(&probe);
        probe[(i, j)] = x0 - h;
        let fm = f(&probe);
        probe[(i, j)] = x0;
        (fp - fm) / (2.0 * h)
    })
}

/// `‖a − b‖_F / max(‖b‖_F, floor)`.
pub fn relative_error(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    #[test]
    fn exact_on_linear_functions() {
        let d = Rng::new(1).gaussian_matrix(4, 3);
        let g = finite_diff_grad(|x| d.dot(x), &Matrix::zeros(4, 3), 1e-3);
        assert!((&g - &d).max_abs() < 1e-12);
    }

    #[test]
    fn quadratic_with_known_hessian() {
        // f = ½ xᵀHx on a column, ∇f = Hx; central differences are exact for quadratics
        let h = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let x = Matrix::from_rows(&[&[0.5], &[-1.0]]);
        let g = finite_diff_grad(|v| 0.5 * v.dot(&h.matmul(v)), &x, 1e-2);
        assert!((&g - &h.matmul(&x)).max_abs() < 1e-12);
    }
}
