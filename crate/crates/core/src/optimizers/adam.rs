//! Adam on St(n, m).
//!
//! Second moments `p` (m×m) and `q` (n×m) are tracked elementwise for the two
//! gradient terms. Only the second moment carries a bias factor
//! `sqrt(1 − β₂^{i+1})`; the first moment is left uncorrected.

use super::hyper::AdamHyper;
use super::GradientOracle;
use crate::error::{Error, Result};
use crate::linalg::{polar_retract, Matrix};
use crate::manifold::{gradient_terms, structure_errors, StiefelPoint, StructureErrors};

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub x: Matrix,
    pub z: Matrix,
    pub u: Matrix,
    pub p: Matrix,
    pub q: Matrix,
    pub step: u64,
}

impl AdamState {
    pub fn new(x: StiefelPoint) -> Self {
        let (n, m) = x.matrix().shape();
        Self {
            x: x.into_matrix(),
            z: Matrix::zeros(m, m),
            u: Matrix::zeros(n, m),
            p: Matrix::zeros(m, m),
            q: Matrix::zeros(n, m),
            step: 0,
        }
    }

    pub fn structure(&self) -> StructureErrors {
        structure_errors(&self.x, &self.z, &self.u)
    }
}

/// `A ⊘ (B^{∘1/2} + ε)`.
pub(crate) fn precondition(a: &Matrix, second: &Matrix, eps: f64) -> Matrix {
    a.zip_map(second, |v, s| v / (s.sqrt() + eps))
}

/// One Adam step given the ambient gradient at `state.x`.
pub fn adam_update(state: &AdamState, g: &Matrix, hyper: &AdamHyper) -> Result<AdamState> {
    hyper.validate()?;
    if g.shape() != state.x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "gradient {:?} for a {:?} point",
            g.shape(),
            state.x.shape()
        )));
    }
    g.ensure_finite("gradient")?;
    let AdamHyper { eta, beta1, beta2, eps, .. } = *hyper;
    let kappa = 0.5 * (3.0 * hyper.metric.a() - 2.0);
    let (fy, gv) = gradient_terms(&state.x, g, hyper.metric);

    let p = state.p.zip_map(&fy, |p, f| beta2 * p + (1.0 - beta2) * f * f);
    let q = state.q.zip_map(&gv, |q, g| beta2 * q + (1.0 - beta2) * g * g);
    let bias = (1.0 - beta2.powf(state.step as f64 + 1.0)).sqrt();

    // perpendicular momentum
    let mut u_half = state.u.scale(beta1);
    u_half.axpy(kappa * eta, &state.u.matmul(&state.z));
    u_half.axpy(-(1.0 - beta1), &gv);

    // rotational momentum and position
    let z = state.z.zip_map(&fy, |z, f| beta1 * z - (1.0 - beta1) * f);
    let x = &state.x;
    let x_half = x.add_scaled(eta * bias, &x.matmul(&precondition(&z, &p, eps)));

    // retraction; the projection needs the exact Gram inverse since x_half is off the manifold
    let gram = x_half.t_matmul(&x_half);
    let scaled = precondition(&u_half, &q, eps);
    let coeff = gram.solve(&x_half.t_matmul(&scaled))?;
    let u_tilde = (&scaled - &x_half.matmul(&coeff)).scale(bias);
    let x_dagger = x_half.add_scaled(eta, &u_tilde.matmul(&gram));
    let x_new = polar_retract(&x_dagger, hyper.root)?;
    let u_new = u_half.add_scaled(-eta, &x_half.matmul(&u_tilde.t_matmul(&u_half)));

    let mut out = AdamState {
        x: x_new,
        z,
        u: u_new,
        p,
        q,
        step: state.step + 1,
    };
    if hyper.skew_scrub_every > 0 && out.step % hyper.skew_scrub_every as u64 == 0 {
        out.z = out.z.skew_part();
    }
    out.x.ensure_finite("position")?;
    out.z.ensure_finite("rotational momentum")?;
    out.u.ensure_finite("perpendicular momentum")?;
    Ok(out)
}

pub fn adam_step(state: &AdamState, oracle: &mut dyn GradientOracle, hyper: &AdamHyper) -> Result<AdamState> {
    let g = oracle.gradient(&state.x);
    adam_update(state, &g, hyper)
}
