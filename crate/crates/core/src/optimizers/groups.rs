//! Joint optimization of Stiefel and Euclidean parameter blocks with one
//! shared learning rate.
//!
//! Euclidean blocks use the same rescaled recursions as the Stiefel
//! optimizers with the geometry removed:
//! momentum `m ← μm − g, w ← w + ηm`; Adam
//! `m ← β₁m − (1−β₁)g, v ← β₂v + (1−β₂)g², w ← w + η sqrt(1−β₂^{i+1}) m ⊘ (v^{∘1/2}+ε)`.

use super::adam::{adam_update, precondition, AdamState};
use super::hyper::{AdamHyper, SgdHyper};
use super::sgd::{sgd_update, SgdState};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::{StiefelPoint, StructureErrors};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Stiefel,
    Euclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupMethod {
    Momentum,
    Adam,
}

/// Shared hyperparameters; `eta` is the single learning rate for every group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedHyper {
    pub method: GroupMethod,
    pub sgd: SgdHyper,
    pub adam: AdamHyper,
}

impl MixedHyper {
    pub fn momentum(sgd: SgdHyper) -> Self {
        Self { method: GroupMethod::Momentum, sgd, adam: AdamHyper { eta: sgd.eta, ..AdamHyper::default() } }
    }

    pub fn adam(adam: AdamHyper) -> Self {
        let sgd = SgdHyper { eta: adam.eta, ..SgdHyper::new(adam.eta, 0.9).expect("positive eta") };
        Self { method: GroupMethod::Adam, sgd, adam }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum GroupState {
    StiefelMomentum(SgdState),
    StiefelAdam(AdamState),
    EuclidMomentum { w: Matrix, m: Matrix },
    EuclidAdam { w: Matrix, m: Matrix, v: Matrix, step: u64 },
}

/// Gradients of a joint objective with respect to every block.
pub trait JointOracle {
    fn gradients(&mut self, params: &[&Matrix]) -> Vec<Matrix>;

    fn value(&mut self, _params: &[&Matrix]) -> f64 {
        f64::NAN
    }
}

pub struct MixedOptimizer {
    groups: Vec<GroupState>,
    hyper: MixedHyper,
}

impl MixedOptimizer {
    /// Stiefel blocks must be feasible; Euclidean blocks are arbitrary.
    pub fn new(params: Vec<(Geometry, Matrix)>, hyper: MixedHyper) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidInput("no parameter groups".into()));
        }
        match hyper.method {
            GroupMethod::Momentum => hyper.sgd.validate()?,
            GroupMethod::Adam => hyper.adam.validate()?,
        }
        let mut groups = Vec::with_capacity(params.len());
        for (geom, w) in params {
            w.ensure_finite("initial parameter")?;
            let (r, c) = w.shape();
            groups.push(match (geom, hyper.method) {
                (Geometry::Stiefel, GroupMethod::Momentum) => GroupState::StiefelMomentum(SgdState::new(StiefelPoint::new(w)?)),
                (Geometry::Stiefel, GroupMethod::Adam) => GroupState::StiefelAdam(AdamState::new(StiefelPoint::new(w)?)),
                (Geometry::Euclidean, GroupMethod::Momentum) => GroupState::EuclidMomentum { w, m: Matrix::zeros(r, c) },
                (Geometry::Euclidean, GroupMethod::Adam) => GroupState::EuclidAdam {
                    w,
                    m: Matrix::zeros(r, c),
                    v: Matrix::zeros(r, c),
                    step: 0,
                },
            });
        }
        Ok(Self { groups, hyper })
    }

    pub fn params(&self) -> Vec<&Matrix> {
        self.groups
            .iter()
            .map(|g| match g {
                GroupState::StiefelMomentum(s) => &s.x,
                GroupState::StiefelAdam(s) => &s.x,
                GroupState::EuclidMomentum { w, .. } | GroupState::EuclidAdam { w, .. } => w,
            })
            .collect()
    }

    /// Worst structure residual over the Stiefel groups.
    pub fn structure(&self) -> StructureErrors {
        self.groups.iter().fold(StructureErrors::default(), |acc, g| match g {
            GroupState::StiefelMomentum(s) => acc.max_with(s.structure()),
            GroupState::StiefelAdam(s) => acc.max_with(s.structure()),
            _ => acc,
        })
    }

    pub fn step(&mut self, oracle: &mut dyn JointOracle) -> Result<()> {
        let grads = oracle.gradients(&self.params());
        if grads.len() != self.groups.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} gradients for {} groups",
                grads.len(),
                self.groups.len()
            )));
        }
        let sgd = self.hyper.sgd;
        let adam = self.hyper.adam;
        let mut next = Vec::with_capacity(self.groups.len());
        for (state, g) in self.groups.iter().zip(&grads) {
            next.push(match state {
                GroupState::StiefelMomentum(s) => GroupState::StiefelMomentum(sgd_update(s, g, &sgd)?),
                GroupState::StiefelAdam(s) => GroupState::StiefelAdam(adam_update(s, g, &adam)?),
                GroupState::EuclidMomentum { w, m } => {
                    check_euclid(w, g)?;
                    let m = m.zip_map(g, |m, g| sgd.mu * m - g);
                    GroupState::EuclidMomentum { w: w.add_scaled(sgd.eta, &m), m }
                }
                GroupState::EuclidAdam { w, m, v, step } => {
                    check_euclid(w, g)?;
                    let AdamHyper { eta, beta1, beta2, eps, .. } = adam;
                    let m = m.zip_map(g, |m, g| beta1 * m - (1.0 - beta1) * g);
                    let v = v.zip_map(g, |v, g| beta2 * v + (1.0 - beta2) * g * g);
                    let bias = (1.0 - beta2.powf(*step as f64 + 1.0)).sqrt();
                    let w = w.add_scaled(eta * bias, &precondition(&m, &v, eps));
                    w.ensure_finite("Euclidean parameter")?;
                    GroupState::EuclidAdam { w, m, v, step: step + 1 }
                }
            });
        }
        self.groups = next;
        Ok(())
    }
}

fn check_euclid(w: &Matrix, g: &Matrix) -> Result<()> {
    if w.shape() != g.shape() {
        return Err(Error::DimensionMismatch(format!("gradient {:?} for block {:?}", g.shape(), w.shape())));
    }
    g.ensure_finite("gradient")
}
