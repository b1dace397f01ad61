//! Momentum SGD on St(n, m) as a composition of three split maps.
//!
//! State is kept in rescaled coordinates: `Z` is the skew momentum inside
//! span(X), `U` the momentum orthogonal to X. One step computes both gradient
//! terms once at the incoming `X` and then applies the maps in
//! [`SgdHyper::order`].

use super::hyper::{Phi1Mode, Phi2Mode, Precision, SgdHyper, SplitMap};
use super::GradientOracle;
use crate::error::{Error, Result};
use crate::linalg::{cayley, cayley_general, expm_skew, polar_retract, Matrix};
use crate::manifold::{gradient_terms, structure_errors, StiefelPoint, StructureErrors};

#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    pub x: Matrix,
    pub z: Matrix,
    pub u: Matrix,
    pub step: u64,
}

impl SgdState {
    /// Start at `x` with zero momentum.
    pub fn new(x: StiefelPoint) -> Self {
        let (n, m) = x.matrix().shape();
        Self {
            x: x.into_matrix(),
            z: Matrix::zeros(m, m),
            u: Matrix::zeros(n, m),
            step: 0,
        }
    }

    pub fn from_parts(x: Matrix, z: Matrix, u: Matrix) -> Result<Self> {
        let (n, m) = x.shape();
        if z.shape() != (m, m) || u.shape() != (n, m) {
            return Err(Error::DimensionMismatch(format!(
                "state blocks X {:?}, Z {:?}, U {:?}",
                x.shape(),
                z.shape(),
                u.shape()
            )));
        }
        Ok(Self { x, z, u, step: 0 })
    }

    pub fn structure(&self) -> StructureErrors {
        structure_errors(&self.x, &self.z, &self.u)
    }
}

/// Perpendicular-momentum map. Only `U` changes.
///
/// Forward Euler: `U ← μU + (3a−2)/2 · η U Z − gV`. The Cayley and exact
/// variants integrate the linear part `−U K` with `K = −ln μ · I − (3a−2)/2 · η Z`
/// by a Cayley map or by the matrix exponential respectively.
pub fn phi2_bar(state: &SgdState, gv: &Matrix, hyper: &SgdHyper) -> Result<SgdState> {
    let kappa = 0.5 * (3.0 * hyper.metric.a() - 2.0);
    let eta = hyper.eta;
    let mu = hyper.mu;
    let u = &state.u;
    let z = &state.z;

    let u_new = match hyper.phi2_mode {
        Phi2Mode::ForwardEuler => {
            let mut out = u.scale(mu);
            out.axpy(kappa * eta, &u.matmul(z));
            out -= gv;
            out
        }
        Phi2Mode::Cayley => {
            let k = friction_generator(z, kappa * eta, mu);
            let r = cayley_general(&k.scale(-1.0))?;
            &u.matmul(&r) - gv
        }
        Phi2Mode::Exact => {
            let lambda = -mu.ln();
            let m = z.rows();
            // e^{−K} = μ · expm(κηZ) since the identity part commutes
            let decay = expm_skew(&z.scale(kappa * eta))?.scale(mu);
            let k = friction_generator(z, kappa * eta, mu);
            let forcing = k.solve(&(&Matrix::identity(m) - &decay))?;
            let gain = lambda / (1.0 - mu);
            let mut out = u.matmul(&decay);
            out.axpy(-gain, &gv.matmul(&forcing));
            out
        }
    };
    Ok(SgdState {
        u: u_new,
        ..state.clone()
    })
}

/// `K = −ln μ · I − s Z`.
fn friction_generator(z: &Matrix, s: f64, mu: f64) -> Matrix {
    let lambda = -mu.ln();
    let m = z.rows();
    Matrix::from_fn(m, m, |i, j| {
        let d = if i == j { lambda } else { 0.0 };
        d - s * z[(i, j)]
    })
}

/// Rotational map: `Z ← μZ − fY`, and `X` moves inside its own span.
///
/// The forward-Euler position update uses the incoming `Z` unless
/// [`SgdHyper::use_updated_z`] is set; the Cayley and exponential variants
/// always use the updated `Z`.
pub fn phi1_tilde(state: &SgdState, fy: &Matrix, hyper: &SgdHyper) -> Result<SgdState> {
    let mu = hyper.mu;
    let z_new = state.z.zip_map(fy, |z, f| mu * z - f);
    let x = &state.x;
    let x_new = match hyper.phi1_mode {
        Phi1Mode::ForwardEuler => {
            let z_used = if hyper.use_updated_z { &z_new } else { &state.z };
            x.add_scaled(hyper.eta, &x.matmul(z_used))
        }
        Phi1Mode::Cayley => x.matmul(&cayley(&z_new, hyper.eta)?),
        Phi1Mode::Expm => x.matmul(&expm_skew(&z_new.scale(hyper.eta))?),
    };
    Ok(SgdState {
        x: x_new,
        z: z_new,
        u: state.u.clone(),
        step: state.step,
    })
}

/// Normal drift followed by the polar retraction:
///
/// ```text
/// X† = X + η U (XᵀX)
/// X  ← X† (X†ᵀX†)^{-1/2}
/// U  ← U − η X (UᵀU)
/// ```
///
/// The `XᵀX` factor keeps `XᵀU = 0` exact after the step even when the
/// incoming `X` is off the manifold.
pub fn phi3_bar(state: &SgdState, hyper: &SgdHyper) -> Result<SgdState> {
    let x = &state.x;
    let u = &state.u;
    let eta = hyper.eta;
    let gram = x.t_matmul(x);
    let x_dagger = x.add_scaled(eta, &u.matmul(&gram));
    let x_new = polar_retract(&x_dagger, hyper.root)?;
    let u_new = u.add_scaled(-eta, &x.matmul(&u.t_matmul(u)));
    Ok(SgdState {
        x: x_new,
        z: state.z.clone(),
        u: u_new,
        step: state.step,
    })
}

/// One optimizer step given the ambient Euclidean gradient `g` at `state.x`.
pub fn sgd_update(state: &SgdState, g: &Matrix, hyper: &SgdHyper) -> Result<SgdState> {
    hyper.validate()?;
    if g.shape() != state.x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "gradient {:?} for a {:?} point",
            g.shape(),
            state.x.shape()
        )));
    }
    g.ensure_finite("gradient")?;
    let (fy, gv) = gradient_terms(&state.x, g, hyper.metric);

    let mut s = state.clone();
    for map in hyper.order {
        s = match map {
            SplitMap::Perpendicular => phi2_bar(&s, &gv, hyper)?,
            SplitMap::Rotation => phi1_tilde(&s, &fy, hyper)?,
            SplitMap::Retraction => phi3_bar(&s, hyper)?,
        };
    }
    s.step += 1;
    if hyper.skew_scrub_every > 0 && s.step % hyper.skew_scrub_every as u64 == 0 {
        s.z = s.z.skew_part();
    }
    if hyper.precision == Precision::Single {
        for m in [&mut s.x, &mut s.z, &mut s.u] {
            *m = m.map(|v| v as f32 as f64);
        }
    }
    s.x.ensure_finite("position")?;
    s.z.ensure_finite("rotational momentum")?;
    s.u.ensure_finite("perpendicular momentum")?;
    Ok(s)
}

/// One step with a single oracle call at the incoming point.
pub fn sgd_step(state: &SgdState, oracle: &mut dyn GradientOracle, hyper: &SgdHyper) -> Result<SgdState> {
    let g = oracle.gradient(&state.x);
    sgd_update(state, &g, hyper)
}
