//! Gradient oracles, a uniform optimizer interface and the traced run loop.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::time::Instant;

use super::adam::{adam_update, AdamState};
use super::cayley_gd::momentumless_cayley_step;
use super::hyper::{AdamHyper, OptimizerKind, SgdHyper};
use super::sgd::{sgd_update, SgdState};
use super::son::{son_adam_update, son_sgd_update, SonState};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::manifold::{feasibility, structure_errors, StiefelPoint, StructureErrors};

/// Supplies the ambient Euclidean gradient `∂f/∂X`, and optionally `f`.
pub trait GradientOracle {
    fn gradient(&mut self, x: &Matrix) -> Matrix;

    /// Objective value for tracing; NaN when unknown.
    fn value(&mut self, _x: &Matrix) -> f64 {
        f64::NAN
    }
}

impl<F: FnMut(&Matrix) -> Matrix> GradientOracle for F {
    fn gradient(&mut self, x: &Matrix) -> Matrix {
        self(x)
    }
}

/// Oracle built from a joint `(value, gradient)` closure.
pub struct Objective<F>(pub F);

impl<F: FnMut(&Matrix) -> (f64, Matrix)> GradientOracle for Objective<F> {
    fn gradient(&mut self, x: &Matrix) -> Matrix {
        (self.0)(x).1
    }

    fn value(&mut self, x: &Matrix) -> f64 {
        (self.0)(x).0
    }
}

/// Adds i.i.d. `N(0, σ²)` noise to every gradient entry. Values pass through.
pub struct NoisyOracle<O> {
    pub inner: O,
    pub sigma: f64,
    pub rng: Rng,
}

impl<O: GradientOracle> GradientOracle for NoisyOracle<O> {
    fn gradient(&mut self, x: &Matrix) -> Matrix {
        let g = self.inner.gradient(x);
        let noise = self.rng.gaussian_matrix(g.rows(), g.cols());
        g.add_scaled(self.sigma, &noise)
    }

    fn value(&mut self, x: &Matrix) -> f64 {
        self.inner.value(x)
    }
}

/// Anything that advances a point on St(n, m) one oracle call at a time.
pub trait StiefelOptimizer {
    fn step(&mut self, oracle: &mut dyn GradientOracle) -> Result<()>;
    fn point(&self) -> &Matrix;
    /// `(feas, skew, perp)` of the current state.
    fn structure(&self) -> StructureErrors;
}

pub struct Sgd {
    pub state: SgdState,
    pub hyper: SgdHyper,
}

pub struct Adam {
    pub state: AdamState,
    pub hyper: AdamHyper,
}

pub struct SonSgd {
    pub state: SonState,
    pub hyper: SgdHyper,
}

pub struct SonAdam {
    pub state: SonState,
    pub hyper: AdamHyper,
}

pub struct CayleyGd {
    pub x: Matrix,
    pub eta: f64,
}

impl StiefelOptimizer for Sgd {
    fn step(&mut self, oracle: &mut dyn GradientOracle) -> Result<()> {
        let g = oracle.gradient(&self.state.x);
        self.state = sgd_update(&self.state, &g, &self.hyper)?;
        Ok(())
    }
    fn point(&self) -> &Matrix {
        &self.state.x
    }
    fn structure(&self) -> StructureErrors {
        self.state.structure()
    }
}

impl StiefelOptimizer for Adam {
    fn step(&mut self, oracle: &mut dyn GradientOracle) -> Result<()> {
        let g = oracle.gradient(&self.state.x);
        self.state = adam_update(&self.state, &g, &self.hyper)?;
        Ok(())
    }
    fn point(&self) -> &Matrix {
        &self.state.x
    }
    fn structure(&self) -> StructureErrors {
        self.state.structure()
    }
}

fn son_structure(s: &SonState) -> StructureErrors {
    StructureErrors {
        feas: feasibility(&s.x),
        skew: s.y.skew_residual(),
        perp: 0.0,
    }
}

impl StiefelOptimizer for SonSgd {
    fn step(&mut self, oracle: &mut dyn GradientOracle) -> Result<()> {
        let g = oracle.gradient(&self.state.x);
        self.state = son_sgd_update(&self.state, &g, &self.hyper)?;
        Ok(())
    }
    fn point(&self) -> &Matrix {
        &self.state.x
    }
    fn structure(&self) -> StructureErrors {
        son_structure(&self.state)
    }
}

impl StiefelOptimizer for SonAdam {
    fn step(&mut self, oracle: &mut dyn GradientOracle) -> Result<()> {
        let g = oracle.gradient(&self.state.x);
        self.state = son_adam_update(&self.state, &g, &self.hyper)?;
        Ok(())
    }
    fn point(&self) -> &Matrix {
        &self.state.x
    }
    fn structure(&self) -> StructureErrors {
        son_structure(&self.state)
    }
}

impl StiefelOptimizer for CayleyGd {
    fn step(&mut self, oracle: &mut dyn GradientOracle) -> Result<()> {
        let g = oracle.gradient(&self.x);
        self.x = momentumless_cayley_step(&self.x, &g, self.eta)?;
        Ok(())
    }
    fn point(&self) -> &Matrix {
        &self.x
    }
    fn structure(&self) -> StructureErrors {
        let m = self.x.cols();
        structure_errors(&self.x, &Matrix::zeros(m, m), &Matrix::zeros(self.x.rows(), m))
    }
}

/// Any of the built-in optimizers, selected at runtime.
pub enum AnyOptimizer {
    Sgd(Sgd),
    Adam(Adam),
    SonSgd(SonSgd),
    SonAdam(SonAdam),
    CayleyGd(CayleyGd),
}

impl AnyOptimizer {
    /// Fresh optimizer with zero momenta. `cayley-gd` uses `sgd.eta`.
    pub fn new(kind: OptimizerKind, x0: StiefelPoint, sgd: SgdHyper, adam: AdamHyper) -> Result<Self> {
        Ok(match kind {
            OptimizerKind::Sgd => {
                sgd.validate()?;
                AnyOptimizer::Sgd(Sgd { state: SgdState::new(x0), hyper: sgd })
            }
            OptimizerKind::Adam => {
                adam.validate()?;
                AnyOptimizer::Adam(Adam { state: AdamState::new(x0), hyper: adam })
            }
            OptimizerKind::SonSgd => {
                sgd.validate()?;
                AnyOptimizer::SonSgd(SonSgd { state: SonState::new(x0.into_matrix())?, hyper: sgd })
            }
            OptimizerKind::SonAdam => {
                adam.validate()?;
                AnyOptimizer::SonAdam(SonAdam { state: SonState::new(x0.into_matrix())?, hyper: adam })
            }
            OptimizerKind::CayleyGd => {
                if !(sgd.eta.is_finite() && sgd.eta > 0.0) {
                    return Err(Error::InvalidInput(format!("eta must be positive, got {}", sgd.eta)));
                }
                AnyOptimizer::CayleyGd(CayleyGd { x: x0.into_matrix(), eta: sgd.eta })
            }
        })
    }

    fn inner(&self) -> &dyn StiefelOptimizer {
        match self {
            AnyOptimizer::Sgd(o) => o,
            AnyOptimizer::Adam(o) => o,
            AnyOptimizer::SonSgd(o) => o,
            AnyOptimizer::SonAdam(o) => o,
            AnyOptimizer::CayleyGd(o) => o,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn StiefelOptimizer {
        match self {
            AnyOptimizer::Sgd(o) => o,
            AnyOptimizer::Adam(o) => o,
            AnyOptimizer::SonSgd(o) => o,
            AnyOptimizer::SonAdam(o) => o,
            AnyOptimizer::CayleyGd(o) => o,
        }
    }
}

impl StiefelOptimizer for AnyOptimizer {
    fn step(&mut self, oracle: &mut dyn GradientOracle) -> Result<()> {
        self.inner_mut().step(oracle)
    }
    fn point(&self) -> &Matrix {
        self.inner().point()
    }
    fn structure(&self) -> StructureErrors {
        self.inner().structure()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: u64,
    pub objective: f64,
    pub feas: f64,
    pub skew: f64,
    pub perp: f64,
    /// Cumulative time spent inside optimizer steps.
    pub wall_ns: u128,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "iter,objective,feas,skew,perp,wall_ns";

impl Trace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Elementwise maximum of the structure columns over all rows.
    pub fn max_structure(&self) -> StructureErrors {
        self.rows.iter().fold(StructureErrors::default(), |acc, r| {
            acc.max_with(StructureErrors { feas: r.feas, skew: r.skew, perp: r.perp })
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.iter, r.objective, r.feas, r.skew, r.perp, r.wall_ns
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Trace> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != TRACE_HEADER {
            return Err(Error::Parse(format!("unexpected trace header `{header}`")));
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::Parse(format!("trace line {}: expected 6 columns", k + 2)));
            }
            let bad = |e: &dyn fmt::Display| Error::Parse(format!("trace line {}: {e}", k + 2));
            let real = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(&e));
            rows.push(TraceRow {
                iter: cols[0].trim().parse().map_err(|e| bad(&e))?,
                objective: real(cols[1])?,
                feas: real(cols[2])?,
                skew: real(cols[3])?,
                perp: real(cols[4])?,
                wall_ns: cols[5].trim().parse().map_err(|e| bad(&e))?,
            });
        }
        Ok(Trace { rows })
    }
}

/// A run that stopped early. `trace` holds every row recorded before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub trace: Trace,
    pub iter: u64,
    pub error: Error,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed at iteration {}: {}", self.iter, self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Runs `n_iters` steps, recording a row at iteration 0, every `trace_every`
/// iterations and at the final iteration.
pub fn run(
    opt: &mut dyn StiefelOptimizer,
    oracle: &mut dyn GradientOracle,
    n_iters: u64,
    trace_every: u64,
) -> std::result::Result<Trace, RunFailure> {
    let every = trace_every.max(1);
    let mut trace = Trace::default();
    let mut elapsed: u128 = 0;
    let record = |trace: &mut Trace, opt: &dyn StiefelOptimizer, oracle: &mut dyn GradientOracle, iter, elapsed| {
        let s = opt.structure();
        trace.rows.push(TraceRow {
            iter,
            objective: oracle.value(opt.point()),
            feas: s.feas,
            skew: s.skew,
            perp: s.perp,
            wall_ns: elapsed,
        });
    };
    record(&mut trace, opt, oracle, 0, 0);
    for i in 1..=n_iters {
        let t0 = Instant::now();
        let res = opt.step(oracle);
        elapsed += t0.elapsed().as_nanos();
        if let Err(error) = res {
            return Err(RunFailure { trace, iter: i, error });
        }
        if i % every == 0 || i == n_iters {
            record(&mut trace, opt, oracle, i, elapsed);
        }
    }
    Ok(trace)
}
