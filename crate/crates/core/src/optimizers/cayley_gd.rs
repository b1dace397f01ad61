//! Momentumless Cayley-retraction gradient descent, used as a baseline.
//!
//! With `W = G Xᵀ − X Gᵀ = L Rᵀ`, `L = [G, X]`, `R = [X, −G]`, the update
//! `(I + η/2 W)^{-1}(I − η/2 W) X` equals
//! `X − η L (I + η/2 RᵀL)^{-1} RᵀX`, which costs O(nm²).

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub fn momentumless_cayley_step(x: &Matrix, g: &Matrix, eta: f64) -> Result<Matrix> {
    if g.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "gradient {:?} for a {:?} point",
            g.shape(),
            x.shape()
        )));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidInput(format!("learning rate must be positive, got {eta}")));
    }
    g.ensure_finite("gradient")?;
    let m = x.cols();
    let l = g.hstack(x);
    let r = x.hstack(&g.scale(-1.0));
    let mut core = r.t_matmul(&l).scale(0.5 * eta);
    for i in 0..2 * m {
        core[(i, i)] += 1.0;
    }
    let coeff = core.solve(&r.t_matmul(x))?;
    let out = x.add_scaled(-eta, &l.matmul(&coeff));
    out.ensure_finite("position")?;
    Ok(out)
}
