//! Small objectives with closed-form gradients and optima.

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_spd, Matrix, RootConfig};
use crate::optimizers::GradientOracle;

/// `f(X) = ½ Tr(XᵀAX) + Tr(BᵀX)` with symmetric `A`; `∇f = AX + B`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub a: Matrix,
    pub b: Matrix,
}

impl Quadratic {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() || a.rows() != b.rows() {
            return Err(Error::DimensionMismatch(format!("A {:?}, B {:?}", a.shape(), b.shape())));
        }
        if a.sym_residual() > 1e-12 {
            return Err(Error::InvalidInput("A must be symmetric".into()));
        }
        Ok(Self { a, b })
    }

    pub fn value(&self, x: &Matrix) -> f64 {
        0.5 * x.dot(&self.a.matmul(x)) + self.b.dot(x)
    }

    pub fn gradient(&self, x: &Matrix) -> Matrix {
        &self.a.matmul(x) + &self.b
    }
}

/// `f(X) = ½ ‖X − D‖²_F`; `∇f = X − D`.
#[derive(Clone, Debug)]
pub struct Procrustes {
    pub d: Matrix,
}

impl Procrustes {
    pub fn value(&self, x: &Matrix) -> f64 {
        let r = x - &self.d;
        0.5 * r.dot(&r)
    }

    pub fn gradient(&self, x: &Matrix) -> Matrix {
        x - &self.d
    }

    /// Minimiser over St(n, m): the polar factor `D (DᵀD)^{-1/2}`.
    ///
    /// On SO(n) this is also the minimiser when `det D > 0`.
    pub fn optimum(&self) -> Result<Matrix> {
        let gram = self.d.t_matmul(&self.d).sym_part();
        Ok(self.d.matmul(&inv_sqrt_spd(&gram, RootConfig::default())?))
    }
}

/// `f(X) = −Tr(DᵀX)`; `∇f = −D`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub d: Matrix,
}

impl Linear {
    pub fn value(&self, x: &Matrix) -> f64 {
        -self.d.dot(x)
    }

    pub fn gradient(&self, _x: &Matrix) -> Matrix {
        self.d.scale(-1.0)
    }
}

macro_rules! oracle {
    ($t:ty) => {
        impl GradientOracle for $t {
            fn gradient(&mut self, x: &Matrix) -> Matrix {
                <$t>::gradient(self, x)
            }
            fn value(&mut self, x: &Matrix) -> f64 {
                <$t>::value(self, x)
            }
        }
    };
}

oracle!(Quadratic);
oracle!(Procrustes);
oracle!(Linear);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthogonal_init, Rng};

    #[test]
    fn procrustes_optimum_beats_random_points() {
        let mut rng = Rng::new(1);
        let p = Procrustes { d: rng.gaussian_matrix(6, 3) };
        let best = p.optimum().unwrap();
        assert!(crate::manifold::feasibility(&best) < 1e-12);
        for _ in 0..100 {
            let x = orthogonal_init(6, 3, &mut rng).unwrap();
            assert!(p.value(&x) >= p.value(&best) - 1e-12);
        }
    }

    #[test]
    fn linear_gradient_is_constant() {
        let d = Rng::new(2).gaussian_matrix(3, 2);
        let l = Linear { d: d.clone() };
        assert_eq!(l.gradient(&Matrix::zeros(3, 2)), d.scale(-1.0));
    }
}
