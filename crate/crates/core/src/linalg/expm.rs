//! Matrix exponential and Cayley map for small square matrices.

use super::Matrix;
use crate::error::{Error, Result};

const SKEW_TOL: f64 = 1e-12;

/// Matrix exponential by scaling and squaring around a truncated Taylor series.
pub fn expm(w: &Matrix) -> Result<Matrix> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expm of a {}x{} matrix",
            w.rows(),
            w.cols()
        )));
    }
    w.ensure_finite("expm input")?;
    let n = w.rows();
    let norm = w.norm_one();
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let b = w.scale(0.5f64.powi(squarings));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&b).scale(1.0 / k as f64);
        sum += &term;
        if term.max_abs() <= f64::EPSILON * 1e-2 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum.ensure_finite("expm output")?;
    Ok(sum)
}

/// Exponential of a skew-symmetric matrix; the result is orthogonal.
pub fn expm_skew(w: &Matrix) -> Result<Matrix> {
    check_skew(w)?;
    expm(w)
}

/// `Cayley(hW) = (I − hW/2)^{-1} (I + hW/2)` for skew `W`.
pub fn cayley(w: &Matrix, h: f64) -> Result<Matrix> {
    check_skew(w)?;
    cayley_general(&w.scale(h))
}

/// `(I − M/2)^{-1} (I + M/2)` for an arbitrary square `M`.
pub fn cayley_general(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Cayley map of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    m.ensure_finite("Cayley input")?;
    let eye = Matrix::identity(m.rows());
    let half = m.scale(0.5);
    (&eye - &half).solve(&(&eye + &half))
}

fn check_skew(w: &Matrix) -> Result<()> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    let r = w.skew_residual();
    if r > SKEW_TOL * w.frobenius_norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "matrix is not skew-symmetric (‖W + Wᵀ‖ = {r:e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn random_skew(m: usize, rng: &mut Rng) -> Matrix {
        rng.gaussian_matrix(m, m).skew_part()
    }

    fn orth_err(r: &Matrix) -> f64 {
        (&r.t_matmul(r) - &Matrix::identity(r.rows())).frobenius_norm()
    }

    #[test]
    fn zero_maps_to_identity() {
        assert_eq!(expm_skew(&Matrix::zeros(4, 4)).unwrap(), Matrix::identity(4));
        let w = random_skew(4, &mut Rng::new(1));
        assert_eq!(cayley(&w, 0.0).unwrap(), Matrix::identity(4));
    }

    #[test]
    fn plane_rotation_closed_form() {
        let theta = 0.3;
        let w = Matrix::from_rows(&[&[0.0, theta], &[-theta, 0.0]]);
        let r = expm_skew(&w).unwrap();
        let want = Matrix::from_rows(&[
            &[theta.cos(), theta.sin()],
            &[-theta.sin(), theta.cos()],
        ]);
        assert!((&r - &want).frobenius_norm() < 1e-12);
    }

    #[test]
    fn two_by_two_cayley_closed_form() {
        let w = Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let h = std::f64::consts::FRAC_PI_2;
        let r = cayley(&w, h).unwrap();
        // (I − hW/2)^{-1}(I + hW/2) for W = J: entries (1 − t²)/(1 + t²), 2t/(1 + t²)
        let t = h / 2.0;
        let d = 1.0 + t * t;
        let want = Matrix::from_rows(&[&[(1.0 - t * t) / d, 2.0 * t / d], &[-2.0 * t / d, (1.0 - t * t) / d]]);
        assert!((&r - &want).frobenius_norm() < 1e-15);
        assert!(orth_err(&r) < 1e-14);
    }

    #[test]
    fn exponential_inverts_under_negation() {
        let w = random_skew(8, &mut Rng::new(2));
        let p = expm_skew(&w).unwrap().matmul(&expm_skew(&w.scale(-1.0)).unwrap());
        assert!((&p - &Matrix::identity(8)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn outputs_are_orthogonal_for_large_skew() {
        let mut rng = Rng::new(4);
        for _ in 0..20 {
            let w = random_skew(6, &mut rng);
            let w = w.scale(10.0 / w.frobenius_norm());
            assert!(orth_err(&expm_skew(&w).unwrap()) < 1e-10);
            assert!(orth_err(&cayley(&w, 1.0).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn cayley_error_is_third_order() {
        let w = random_skew(5, &mut Rng::new(8));
        let hs = [1e-1, 5e-2, 2.5e-2, 1.25e-2];
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| (&cayley(&w, h).unwrap() - &expm_skew(&w.scale(h)).unwrap()).frobenius_norm())
            .collect();
        for pair in errs.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((6.5..=9.5).contains(&ratio), "ratio {ratio}");
        }
        let slope = crate::dynamics::fit_log_slope(&hs, &errs).unwrap();
        assert!((2.7..=3.3).contains(&slope), "slope {slope}");
    }

    #[test]
    fn non_skew_input_rejected() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(expm_skew(&a).is_err());
        assert!(cayley(&a, 0.1).is_err());
    }

    #[test]
    fn general_expm_matches_scalar_decay() {
        let a = Matrix::identity(3).scale(-0.7);
        let e = expm(&a).unwrap();
        assert!((&e - &Matrix::identity(3).scale((-0.7f64).exp())).max_abs() < 1e-15);
    }
}
