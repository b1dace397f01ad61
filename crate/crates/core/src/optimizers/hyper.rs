use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::RootConfig;
use crate::manifold::MetricParams;

/// How the position update inside the rotational map is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Phi1Mode {
    /// `X + η X Z` (first-order truncation; not feasible on its own).
    #[default]
    ForwardEuler,
    /// `X Cayley(η Z)`.
    Cayley,
    /// `X expm(η Z)`.
    Expm,
}

/// How the perpendicular-momentum map is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Phi2Mode {
    #[default]
    ForwardEuler,
    Cayley,
    /// Closed-form flow of the linear `V` dynamics.
    Exact,
}

/// The three split maps that make up one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitMap {
    /// Rotational part: updates `Z` and moves `X` inside its span.
    Rotation,
    /// Perpendicular momentum: updates `U` only.
    Perpendicular,
    /// Normal drift plus polar retraction: updates `X` and `U`.
    Retraction,
}

/// Default application order: perpendicular, then rotation, then retraction.
/// With the forward-Euler rotation map this order still restores every
/// constraint at the end of the step.
pub const DEFAULT_ORDER: [SplitMap; 3] = [SplitMap::Perpendicular, SplitMap::Rotation, SplitMap::Retraction];

/// Storage precision for the optimizer state between steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    Double,
    /// Round `X`, `Z`, `U` to `f32` after every step. Arithmetic inside a step
    /// is still `f64`. Used only for round-off stability experiments.
    Single,
}

pub const DEFAULT_SKEW_SCRUB_EVERY: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdHyper {
    pub eta: f64,
    pub mu: f64,
    pub metric: MetricParams,
    pub phi1_mode: Phi1Mode,
    pub phi2_mode: Phi2Mode,
    /// Use the freshly updated `Z` in the forward-Euler position update
    /// instead of the incoming one.
    pub use_updated_z: bool,
    /// Maps in application order.
    pub order: [SplitMap; 3],
    /// Re-skew `Z` every this many steps; 0 disables.
    pub skew_scrub_every: usize,
    pub root: RootConfig,
    pub precision: Precision,
}

impl SgdHyper {
    pub fn new(eta: f64, mu: f64) -> Result<Self> {
        let h = Self {
            eta,
            mu,
            metric: MetricParams::default(),
            phi1_mode: Phi1Mode::default(),
            phi2_mode: Phi2Mode::default(),
            use_updated_z: false,
            order: DEFAULT_ORDER,
            skew_scrub_every: DEFAULT_SKEW_SCRUB_EVERY,
            root: RootConfig::default(),
            precision: Precision::Double,
        };
        h.validate()?;
        Ok(h)
    }

    /// Hyperparameters of the discretisation with step `h` of the damped
    /// dynamics with friction `gamma`.
    pub fn from_friction(gamma: f64, h: f64) -> Result<Self> {
        let r = Rescaling::new(gamma, h)?;
        Self::new(r.eta(), r.mu())
    }

    pub fn with_metric(mut self, metric: MetricParams) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_modes(mut self, phi1: Phi1Mode, phi2: Phi2Mode) -> Self {
        self.phi1_mode = phi1;
        self.phi2_mode = phi2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidInput(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::InvalidInput(format!("mu must lie in [0, 1), got {}", self.mu)));
        }
        if self.phi2_mode != Phi2Mode::ForwardEuler && self.mu == 0.0 {
            return Err(Error::InvalidInput(
                "phi2 modes cayley/exact need mu > 0 (the friction time is -ln mu)".into(),
            ));
        }
        let mut seen = [false; 3];
        for m in self.order {
            let idx = m as usize;
            if seen[idx] {
                return Err(Error::InvalidInput(format!("split order {:?} repeats a map", self.order)));
            }
            seen[idx] = true;
        }
        Ok(())
    }
}

pub const ADAM_DEFAULT_ETA: f64 = 1e-3;
pub const ADAM_DEFAULT_BETA1: f64 = 0.9;
pub const ADAM_DEFAULT_BETA2: f64 = 0.999;
pub const ADAM_DEFAULT_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub metric: MetricParams,
    pub skew_scrub_every: usize,
    pub root: RootConfig,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            eta: ADAM_DEFAULT_ETA,
            beta1: ADAM_DEFAULT_BETA1,
            beta2: ADAM_DEFAULT_BETA2,
            eps: ADAM_DEFAULT_EPS,
            metric: MetricParams::default(),
            skew_scrub_every: DEFAULT_SKEW_SCRUB_EVERY,
            root: RootConfig::default(),
        }
    }
}

impl AdamHyper {
    pub fn new(eta: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        let h = Self {
            eta,
            beta1,
            beta2,
            eps,
            ..Self::default()
        };
        h.validate()?;
        Ok(h)
    }

    pub fn with_metric(mut self, metric: MetricParams) -> Self {
        self.metric = metric;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidInput(format!("eta must be > 0, got {}", self.eta)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Bridge between a friction/step pair `(γ, h)` and the learning-rate form
/// used by the optimizers:
///
/// ```text
/// c = (1 − e^{−γh}) / γ,   η = c·h,   μ = e^{−γh},   Z = Y / c,   U = V / c
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rescaling {
    pub gamma: f64,
    pub h: f64,
}

impl Rescaling {
    pub fn new(gamma: f64, h: f64) -> Result<Self> {
        if !(gamma > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "friction and step must be positive, got gamma={gamma}, h={h}"
            )));
        }
        Ok(Self { gamma, h })
    }

    /// Momentum scale `c`.
    pub fn scale(&self) -> f64 {
        -(-self.gamma * self.h).exp_m1() / self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.scale() * self.h
    }

    pub fn mu(&self) -> f64 {
        (-self.gamma * self.h).exp()
    }
}

/// Which optimizer drives a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    SonSgd,
    SonAdam,
    CayleyGd,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::SonSgd => "son-sgd",
            OptimizerKind::SonAdam => "son-adam",
            OptimizerKind::CayleyGd => "cayley-gd",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sgd" => Self::Sgd,
            "adam" => Self::Adam,
            "son-sgd" => Self::SonSgd,
            "son-adam" => Self::SonAdam,
            "cayley-gd" => Self::CayleyGd,
            _ => return Err(Error::InvalidInput(format!("unknown optimizer `{s}`"))),
        })
    }
}

impl FromStr for Phi1Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "euler" => Self::ForwardEuler,
            "cayley" => Self::Cayley,
            "expm" => Self::Expm,
            _ => return Err(Error::InvalidInput(format!("unknown phi1 mode `{s}`"))),
        })
    }
}

impl FromStr for Phi2Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "euler" => Self::ForwardEuler,
            "cayley" => Self::Cayley,
            "exact" => Self::Exact,
            _ => return Err(Error::InvalidInput(format!("unknown phi2 mode `{s}`"))),
        })
    }
}

impl fmt::Display for Phi1Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ForwardEuler => "euler",
            Self::Cayley => "cayley",
            Self::Expm => "expm",
        })
    }
}

impl fmt::Display for Phi2Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ForwardEuler => "euler",
            Self::Cayley => "cayley",
            Self::Exact => "exact",
        })
    }
}
