//! Projection robust Wasserstein: maximise over `U ∈ St(d, k)` the entropic
//! transport cost between the projected clouds `{Uᵀxᵢ}` and `{Uᵀyⱼ}`.

use std::path::Path;
use std::time::Instant;

use super::sinkhorn::{check_weights, sinkhorn_warm, SinkhornConfig, TransportPlan};
use crate::error::{Error, Result};
use crate::linalg::{orthogonal_init, symmetric_eigen, Matrix, Rng};
use crate::manifold::StiefelPoint;
use crate::optimizers::{AdamHyper, AnyOptimizer, OptimizerKind, SgdHyper, StiefelOptimizer, Trace, TraceRow};

#[derive(Clone, Debug, PartialEq)]
pub struct PrwProblem {
    /// `N × d`, one point per row.
    pub xs: Matrix,
    /// `N' × d`.
    pub ys: Matrix,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub k: usize,
    /// Entropic regulariser.
    pub reg: f64,
}

impl PrwProblem {
    pub fn new(xs: Matrix, ys: Matrix, r: Vec<f64>, c: Vec<f64>, k: usize, reg: f64) -> Result<Self> {
        let d = xs.cols();
        if ys.cols() != d {
            return Err(Error::DimensionMismatch(format!("point dimensions {} and {}", d, ys.cols())));
        }
        if k == 0 || k > d {
            return Err(Error::InvalidInput(format!("need 1 <= k <= d, got k={k}, d={d}")));
        }
        if r.len() != xs.rows() || c.len() != ys.rows() {
            return Err(Error::DimensionMismatch("weight vectors do not match the point counts".into()));
        }
        check_weights(&r, "source weights")?;
        check_weights(&c, "target weights")?;
        if !(reg.is_finite() && reg > 0.0) {
            return Err(Error::InvalidInput(format!("regularisation must be positive, got {reg}")));
        }
        xs.ensure_finite("source points")?;
        ys.ensure_finite("target points")?;
        Ok(Self { xs, ys, r, c, k, reg })
    }

    /// Uniform weights on both clouds.
    pub fn uniform(xs: Matrix, ys: Matrix, k: usize, reg: f64) -> Result<Self> {
        let r = vec![1.0 / xs.rows() as f64; xs.rows()];
        let c = vec![1.0 / ys.rows() as f64; ys.rows()];
        Self::new(xs, ys, r, c, k, reg)
    }

    pub fn d(&self) -> usize {
        self.xs.cols()
    }
}

/// `C_ij = ‖Uᵀ(xᵢ − yⱼ)‖²`.
pub fn prw_cost(p: &PrwProblem, u: &Matrix) -> Matrix {
    let px = p.xs.matmul(u);
    let py = p.ys.matmul(u);
    let nx: Vec<f64> = (0..px.rows()).map(|i| px.row(i).iter().map(|v| v * v).sum()).collect();
    let ny: Vec<f64> = (0..py.rows()).map(|j| py.row(j).iter().map(|v| v * v).sum()).collect();
    let cross = px.matmul_t(&py);
    Matrix::from_fn(px.rows(), py.rows(), |i, j| (nx[i] + ny[j] - 2.0 * cross[(i, j)]).max(0.0))
}

/// `V_π = Σ π_ij (xᵢ − yⱼ)(xᵢ − yⱼ)ᵀ`, assembled from the marginals of `π`.
pub fn displacement_second_moment(p: &PrwProblem, pi: &Matrix) -> Matrix {
    let rows: Vec<f64> = (0..pi.rows()).map(|i| pi.row(i).iter().sum()).collect();
    let mut cols = vec![0.0; pi.cols()];
    for i in 0..pi.rows() {
        for (acc, v) in cols.iter_mut().zip(pi.row(i)) {
            *acc += v;
        }
    }
    let wx = Matrix::from_fn(p.xs.rows(), p.d(), |i, a| rows[i] * p.xs[(i, a)]);
    let wy = Matrix::from_fn(p.ys.rows(), p.d(), |j, a| cols[j] * p.ys[(j, a)]);
    let cross = p.xs.t_matmul(&pi.matmul(&p.ys));
    let v = &(&p.xs.t_matmul(&wx) + &p.ys.t_matmul(&wy)) - &(&cross + &cross.transpose());
    v.sym_part()
}

/// Transport term `f = Tr(Uᵀ V_π U)` and its gradient `2 V_π U` with `π` held fixed.
pub fn prw_value_grad(p: &PrwProblem, u: &Matrix, plan: &TransportPlan) -> Result<(f64, Matrix)> {
    if u.shape() != (p.d(), p.k) {
        return Err(Error::DimensionMismatch(format!("U is {:?}, expected ({}, {})", u.shape(), p.d(), p.k)));
    }
    if plan.pi.shape() != (p.xs.rows(), p.ys.rows()) {
        return Err(Error::DimensionMismatch(format!("plan is {:?}", plan.pi.shape())));
    }
    let vu = displacement_second_moment(p, &plan.pi).matmul(u);
    Ok((u.dot(&vu), vu.scale(2.0)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrwConfig {
    pub kind: OptimizerKind,
    pub sgd: SgdHyper,
    pub adam: AdamHyper,
    pub n_outer: usize,
    /// Optimizer steps per Sinkhorn solve.
    pub inner_steps: usize,
    pub sinkhorn: SinkhornConfig,
}

impl Default for PrwConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            sgd: SgdHyper::new(1e-3, 0.5).expect("valid defaults"),
            adam: AdamHyper::default(),
            n_outer: 200,
            inner_steps: 1,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PrwResult {
    pub u: StiefelPoint,
    pub plan: TransportPlan,
    /// Transport term at `(u, plan)`.
    pub value: f64,
    /// One row per Sinkhorn solve; `objective` is the transport term.
    pub trace: Trace,
    /// Sinkhorn marginal residual of every solve.
    pub residuals: Vec<f64>,
}

fn solve_plan(p: &PrwProblem, u: &Matrix, cfg: SinkhornConfig, warm: Option<&TransportPlan>) -> Result<TransportPlan> {
    let cost = prw_cost(p, u);
    sinkhorn_warm(&cost, &p.r, &p.c, p.reg, cfg, warm.map(|w| (w.f.as_slice(), w.g.as_slice())))
}

/// Alternates a Sinkhorn solve at the current projection with ascent steps
/// on the transport term, for a fixed number of outer iterations. A final
/// Sinkhorn solve at the returned projection makes `(u, plan, value)`
/// consistent.
pub fn prw_solve(p: &PrwProblem, u0: StiefelPoint, cfg: &PrwConfig) -> Result<PrwResult> {
    if u0.matrix().shape() != (p.d(), p.k) {
        return Err(Error::DimensionMismatch(format!("initial U is {:?}", u0.matrix().shape())));
    }
    let mut opt = AnyOptimizer::new(cfg.kind, u0, cfg.sgd, cfg.adam)?;
    let mut trace = Trace::default();
    let mut residuals = Vec::with_capacity(cfg.n_outer + 1);
    let mut elapsed: u128 = 0;
    let mut plan: Option<TransportPlan> = None;

    for outer in 0..=cfg.n_outer {
        let t0 = Instant::now();
        let current = solve_plan(p, opt.point(), cfg.sinkhorn, plan.as_ref())?;
        let (value, _) = prw_value_grad(p, opt.point(), &current)?;
        residuals.push(current.marginal_residual(&p.r, &p.c));
        let s = opt.structure();
        trace.rows.push(TraceRow {
            iter: outer as u64,
            objective: value,
            feas: s.feas,
            skew: s.skew,
            perp: s.perp,
            wall_ns: elapsed + t0.elapsed().as_nanos(),
        });
        if outer < cfg.n_outer {
            let pi = &current;
            let mut ascent = |u: &Matrix| {
                prw_value_grad(p, u, pi).map(|(_, g)| g.scale(-1.0)).unwrap_or_else(|_| Matrix::zeros(u.rows(), u.cols()))
            };
            for _ in 0..cfg.inner_steps.max(1) {
                opt.step(&mut ascent)?;
            }
        }
        elapsed += t0.elapsed().as_nanos();
        plan = Some(current);
    }
    let plan = plan.expect("at least one Sinkhorn solve");
    let u = StiefelPoint::new_unchecked(opt.point().clone());
    let value = prw_value_grad(p, u.matrix(), &plan)?.0;
    Ok(PrwResult { u, plan, value, trace, residuals })
}

/// Transport term after a Sinkhorn solve at `u`.
pub fn prw_value_at(p: &PrwProblem, u: &Matrix, cfg: SinkhornConfig) -> Result<f64> {
    let plan = match solve_plan(p, u, cfg, None) {
        Ok(plan) => plan,
        Err(Error::SinkhornMaxIter { plan, .. }) => *plan,
        Err(e) => return Err(e),
    };
    Ok(prw_value_grad(p, u, &plan)?.0)
}

/// Best value over `trials` Haar-random projections.
pub fn random_search(p: &PrwProblem, trials: usize, cfg: SinkhornConfig, rng: &mut Rng) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for _ in 0..trials {
        let u = orthogonal_init(p.d(), p.k, rng)?;
        best = best.max(prw_value_at(p, &u, cfg)?);
    }
    Ok(best)
}

/// Two Gaussian clouds in `ℝ^d` that differ only in the first two
/// coordinates: the target is shifted by 4 along `e₁` and has standard
/// deviation 3 along `e₂`. Weights are uniform and `k = 2`.
pub fn two_gaussians(n_points: usize, d: usize, reg: f64, rng: &mut Rng) -> Result<PrwProblem> {
    if d < 2 || n_points == 0 {
        return Err(Error::InvalidInput(format!("need d >= 2 and points, got d={d}, N={n_points}")));
    }
    let xs = rng.gaussian_matrix(n_points, d);
    let mut ys = rng.gaussian_matrix(n_points, d);
    for j in 0..n_points {
        ys[(j, 0)] += 4.0;
        ys[(j, 1)] *= 3.0;
    }
    PrwProblem::uniform(xs, ys, 2, reg)
}

/// `[e₁, e₂]` in `ℝ^d`.
pub fn two_gaussians_plane(d: usize) -> Matrix {
    Matrix::from_fn(d, 2, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Largest principal angle between the column spans of two orthonormal bases.
pub fn largest_principal_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    let m = a.t_matmul(b);
    let (eig, _) = symmetric_eigen(&m.t_matmul(&m).sym_part())?;
    let smallest = eig.first().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    Ok(smallest.sqrt().acos())
}

/// Reads a point cloud in the matrix text format, one point per row.
pub fn load_point_cloud(path: &Path) -> Result<Matrix> {
    Matrix::from_text(&std::fs::read_to_string(path)?)
}

/// Reads a weight vector stored as an `N × 1` or `1 × N` matrix.
pub fn load_weights(path: &Path) -> Result<Vec<f64>> {
    let m = Matrix::from_text(&std::fs::read_to_string(path)?)?;
    if m.rows() != 1 && m.cols() != 1 {
        return Err(Error::Parse(format!("weights must be a vector, got {:?}", m.shape())));
    }
    Ok(m.into_vec())
}
