//! Square case: optimizers on SO(n) with a single skew momentum `Y`.

use super::adam::precondition;
use super::hyper::{AdamHyper, SgdHyper};
use super::GradientOracle;
use crate::error::{Error, Result};
use crate::linalg::{expm_skew, polar_retract, Matrix};
use crate::manifold::gradient_terms;

#[derive(Clone, Debug, PartialEq)]
pub struct SonState {
    pub x: Matrix,
    pub y: Matrix,
    /// Elementwise second moment; unused by the momentum method.
    pub p: Matrix,
    pub step: u64,
}

impl SonState {
    pub fn new(x: Matrix) -> Result<Self> {
        if !x.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "SO(n) state needs a square matrix, got {:?}",
                x.shape()
            )));
        }
        let n = x.rows();
        Ok(Self {
            x,
            y: Matrix::zeros(n, n),
            p: Matrix::zeros(n, n),
            step: 0,
        })
    }
}

fn check_square(state: &SonState, g: &Matrix) -> Result<()> {
    if !state.x.is_square() || g.shape() != state.x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "SO(n) step with X {:?}, G {:?}",
            state.x.shape(),
            g.shape()
        )));
    }
    g.ensure_finite("gradient")
}

/// `Y ← μY − f`, `X ← polar(X expm(ηY))`.
pub fn son_sgd_update(state: &SonState, g: &Matrix, hyper: &SgdHyper) -> Result<SonState> {
    hyper.validate()?;
    check_square(state, g)?;
    let (fy, _) = gradient_terms(&state.x, g, hyper.metric);
    let y = state.y.zip_map(&fy, |y, f| hyper.mu * y - f);
    let x_dagger = state.x.matmul(&expm_skew(&y.scale(hyper.eta))?);
    let x = polar_retract(&x_dagger, hyper.root)?;
    x.ensure_finite("position")?;
    Ok(SonState {
        x,
        y,
        p: state.p.clone(),
        step: state.step + 1,
    })
}

/// Adam on SO(n): the step direction is `Y ⊘ (p^{∘1/2} + ε)`, which stays
/// skew for symmetric `p`.
pub fn son_adam_update(state: &SonState, g: &Matrix, hyper: &AdamHyper) -> Result<SonState> {
    hyper.validate()?;
    check_square(state, g)?;
    let AdamHyper { eta, beta1, beta2, eps, .. } = *hyper;
    let (fy, _) = gradient_terms(&state.x, g, hyper.metric);
    let p = state.p.zip_map(&fy, |p, f| beta2 * p + (1.0 - beta2) * f * f);
    let y = state.y.zip_map(&fy, |y, f| beta1 * y - (1.0 - beta1) * f);
    let bias = (1.0 - beta2.powf(state.step as f64 + 1.0)).sqrt();
    let dir = precondition(&y, &p, eps);
    let skew = dir.skew_residual();
    assert!(
        skew <= 1e-14 * dir.frobenius_norm().max(1.0),
        "preconditioned momentum lost skew-symmetry: {skew:e}"
    );
    let x_dagger = state.x.matmul(&expm_skew(&dir.scale(eta * bias))?);
    let x = polar_retract(&x_dagger, hyper.root)?;
    x.ensure_finite("position")?;
    Ok(SonState {
        x,
        y,
        p,
        step: state.step + 1,
    })
}

pub fn son_sgd_step(state: &SonState, oracle: &mut dyn GradientOracle, hyper: &SgdHyper) -> Result<SonState> {
    let g = oracle.gradient(&state.x);
    son_sgd_update(state, &g, hyper)
}

pub fn son_adam_step(state: &SonState, oracle: &mut dyn GradientOracle, hyper: &AdamHyper) -> Result<SonState> {
    let g = oracle.gradient(&state.x);
    son_adam_update(state, &g, hyper)
}
