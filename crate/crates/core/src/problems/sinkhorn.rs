//! Entropic optimal transport by alternating marginal scaling.
//!
//! The solver tracks dual potentials `(f, g)` with
//! `π_ij = exp((f_i + g_j − C_ij)/reg)`. In the scaling path
//! `u = e^{f/reg}`, `v = e^{g/reg}` and `K = e^{−C/reg}`; the log path
//! updates the potentials directly with log-sum-exp and never underflows.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const SINKHORN_DEFAULT_TOL: f64 = 1e-6;
pub const SINKHORN_DEFAULT_MAX_ITER: usize = 1000;
/// The log path is used when `reg < LOG_DOMAIN_RATIO · median(C)`.
pub const LOG_DOMAIN_RATIO: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Skip the scaling path entirely.
    pub force_log: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { tol: SINKHORN_DEFAULT_TOL, max_iter: SINKHORN_DEFAULT_MAX_ITER, force_log: false }
    }
}

/// A coupling with its dual potentials and convergence record.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub pi: Matrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Max absolute marginal residual of `pi`.
    pub residual: f64,
    pub iters: usize,
    pub log_domain: bool,
    /// Negated dual objective after every sweep; nonincreasing.
    pub objective_history: Vec<f64>,
}

impl TransportPlan {
    /// `max(‖π1 − r‖_∞, ‖πᵀ1 − c‖_∞)`.
    pub fn marginal_residual(&self, r: &[f64], c: &[f64]) -> f64 {
        marginal_residual(&self.pi, r, c)
    }

    /// `⟨π, C⟩`.
    pub fn transport_cost(&self, cost: &Matrix) -> f64 {
        self.pi.dot(cost)
    }
}

pub fn marginal_residual(pi: &Matrix, r: &[f64], c: &[f64]) -> f64 {
    let (n, m) = pi.shape();
    let mut worst: f64 = 0.0;
    let mut cols = vec![0.0; m];
    for i in 0..n {
        let row = pi.row(i);
        worst = worst.max((row.iter().sum::<f64>() - r[i]).abs());
        for (acc, v) in cols.iter_mut().zip(row) {
            *acc += v;
        }
    }
    cols.iter().zip(c).fold(worst, |w, (s, cj)| w.max((s - cj).abs()))
}

pub(crate) fn check_weights(w: &[f64], what: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidInput(format!("{what}: empty weight vector")));
    }
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput(format!("{what}: weights must be positive and finite")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("{what}: weights sum to {s}, expected 1")));
    }
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

/// Solves `min ⟨π, C⟩ + reg ⟨π, log π − 1⟩` subject to `π1 = r`, `πᵀ1 = c`.
pub fn sinkhorn(cost: &Matrix, r: &[f64], c: &[f64], reg: f64, cfg: SinkhornConfig) -> Result<TransportPlan> {
    sinkhorn_warm(cost, r, c, reg, cfg, None)
}

/// As [`sinkhorn`], optionally starting from the potentials of an earlier plan.
pub fn sinkhorn_warm(
    cost: &Matrix,
    r: &[f64],
    c: &[f64],
    reg: f64,
    cfg: SinkhornConfig,
    warm: Option<(&[f64], &[f64])>,
) -> Result<TransportPlan> {
    let (n, m) = cost.shape();
    if r.len() != n || c.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "cost {n}x{m} with {} row and {} column weights",
            r.len(),
            c.len()
        )));
    }
    check_weights(r, "row marginal")?;
    check_weights(c, "column marginal")?;
    if !(reg.is_finite() && reg > 0.0) {
        return Err(Error::InvalidInput(format!("regularisation must be positive, got {reg}")));
    }
    cost.ensure_finite("transport cost")?;
    let (f0, g0) = match warm {
        Some((f, g)) if f.len() == n && g.len() == m && f.iter().chain(g).all(|v| v.is_finite()) => (f.to_vec(), g.to_vec()),
        _ => (vec![0.0; n], vec![0.0; m]),
    };

    let use_log = cfg.force_log || reg < LOG_DOMAIN_RATIO * median(cost.as_slice());
    if !use_log {
        if let Some(plan) = scaling_path(cost, r, c, reg, cfg, &f0, &g0)? {
            return Ok(plan);
        }
    }
    log_path(cost, r, c, reg, cfg, f0, g0)
}

/// `⟨f, r⟩ + ⟨g, c⟩ − reg Σ π`, the entropic dual objective.
fn dual(f: &[f64], g: &[f64], r: &[f64], c: &[f64], reg: f64, mass: f64) -> f64 {
    let a: f64 = f.iter().zip(r).map(|(x, y)| x * y).sum();
    let b: f64 = g.iter().zip(c).map(|(x, y)| x * y).sum();
    a + b - reg * mass
}

fn finish(
    pi: Matrix,
    f: Vec<f64>,
    g: Vec<f64>,
    r: &[f64],
    c: &[f64],
    iters: usize,
    log_domain: bool,
    history: Vec<f64>,
    cfg: SinkhornConfig,
) -> Result<TransportPlan> {
    let residual = marginal_residual(&pi, r, c);
    let plan = TransportPlan { pi, f, g, residual, iters, log_domain, objective_history: history };
    if residual <= cfg.tol {
        Ok(plan)
    } else {
        Err(Error::SinkhornMaxIter { iters, residual, plan: Box::new(plan) })
    }
}

/// Returns `None` when the kernel or the scalings underflow.
fn scaling_path(
    cost: &Matrix,
    r: &[f64],
    c: &[f64],
    reg: f64,
    cfg: SinkhornConfig,
    f0: &[f64],
    g0: &[f64],
) -> Result<Option<TransportPlan>> {
    let (n, m) = cost.shape();
    let k = cost.map(|v| (-v / reg).exp());
    if k.as_slice().iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Ok(None);
    }
    let mut u: Vec<f64> = f0.iter().map(|f| (f / reg).exp()).collect();
    let mut v: Vec<f64> = g0.iter().map(|g| (g / reg).exp()).collect();
    let healthy = |x: &[f64]| x.iter().all(|s| s.is_finite() && *s > 0.0 && *s < 1e300);
    if !healthy(&u) || !healthy(&v) {
        u.fill(1.0);
        v.fill(1.0);
    }
    let mut history = Vec::new();
    let mut iters = 0;
    let mut kv = vec![0.0; n];
    let mut ktu = vec![0.0; m];
    while iters < cfg.max_iter {
        iters += 1;
        for i in 0..n {
            kv[i] = k.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
            u[i] = r[i] / kv[i];
        }
        ktu.fill(0.0);
        for i in 0..n {
            let ui = u[i];
            for (acc, kij) in ktu.iter_mut().zip(k.row(i)) {
                *acc += kij * ui;
            }
        }
        for j in 0..m {
            v[j] = c[j] / ktu[j];
        }
        if !healthy(&u) || !healthy(&v) {
            return Ok(None);
        }
        // columns are exact after the v-update; rows carry the residual
        let mut row_res: f64 = 0.0;
        for i in 0..n {
            let s: f64 = k.row(i).iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() * u[i];
            row_res = row_res.max((s - r[i]).abs());
        }
        let f: Vec<f64> = u.iter().map(|x| reg * x.ln()).collect();
        let g: Vec<f64> = v.iter().map(|x| reg * x.ln()).collect();
        history.push(-dual(&f, &g, r, c, reg, 1.0));
        if row_res <= cfg.tol {
            break;
        }
    }
    let pi = Matrix::from_fn(n, m, |i, j| u[i] * k[(i, j)] * v[j]);
    let f = u.iter().map(|x| reg * x.ln()).collect();
    let g = v.iter().map(|x| reg * x.ln()).collect();
    finish(pi, f, g, r, c, iters, false, history, cfg).map(Some)
}

fn log_path(
    cost: &Matrix,
    r: &[f64],
    c: &[f64],
    reg: f64,
    cfg: SinkhornConfig,
    mut f: Vec<f64>,
    mut g: Vec<f64>,
) -> Result<TransportPlan> {
    let (n, m) = cost.shape();
    let log_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let log_c: Vec<f64> = c.iter().map(|x| x.ln()).collect();
    let mut history = Vec::new();
    let mut iters = 0;
    while iters < cfg.max_iter {
        iters += 1;
        for i in 0..n {
            let row = cost.row(i);
            let lse = log_sum_exp(g.iter().zip(row).map(|(gj, cij)| (gj - cij) / reg));
            f[i] = reg * (log_r[i] - lse);
        }
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| (f[i] - cost[(i, j)]) / reg));
            g[j] = reg * (log_c[j] - lse);
        }
        let mut row_res: f64 = 0.0;
        for i in 0..n {
            let row = cost.row(i);
            let s: f64 = g.iter().zip(row).map(|(gj, cij)| ((f[i] + gj - cij) / reg).exp()).sum();
            row_res = row_res.max((s - r[i]).abs());
        }
        history.push(-dual(&f, &g, r, c, reg, 1.0));
        if row_res <= cfg.tol {
            break;
        }
    }
    let pi = Matrix::from_fn(n, m, |i, j| ((f[i] + g[j] - cost[(i, j)]) / reg).exp());
    finish(pi, f, g, r, c, iters, true, history, cfg)
}
