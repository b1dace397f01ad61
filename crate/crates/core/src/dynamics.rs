//! Continuous-time optimization dynamics on T St(n, m) and tools to check
//! discretizations against them.
//!
//! Two equivalent state forms are provided: `(X, Q)` with `Q = Ẋ`, and
//! `(X, Y, V)` with `Q = XY + V`. The `(X, Y, V)` field is the sum of three
//! split fields whose flows the optimizers approximate.

use crate::error::{Error, Result};
use crate::linalg::{expm, Matrix, Rng};
use crate::manifold::{gradient_terms, MetricParams};
use crate::optimizers::{sgd_update, Rescaling, SgdHyper, SgdState};

/// Constant friction coefficient `γ > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Friction(f64);

impl Friction {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(Self(gamma))
        } else {
            Err(Error::InvalidInput(format!("friction must be positive, got {gamma}")))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.0
    }
}

/// States an explicit one-step method can combine linearly.
pub trait VectorState: Clone {
    fn add_scaled(&self, s: f64, d: &Self) -> Self;
    fn is_finite(&self) -> bool;
}

impl VectorState for f64 {
    fn add_scaled(&self, s: f64, d: &Self) -> Self {
        self + s * d
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl VectorState for Matrix {
    fn add_scaled(&self, s: f64, d: &Self) -> Self {
        Matrix::add_scaled(self, s, d)
    }
    fn is_finite(&self) -> bool {
        Matrix::is_finite(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeStateXQ {
    pub x: Matrix,
    pub q: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeStateXYV {
    pub x: Matrix,
    pub y: Matrix,
    pub v: Matrix,
}

impl VectorState for OdeStateXQ {
    fn add_scaled(&self, s: f64, d: &Self) -> Self {
        Self { x: self.x.add_scaled(s, &d.x), q: self.q.add_scaled(s, &d.q) }
    }
    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.q.is_finite()
    }
}

impl VectorState for OdeStateXYV {
    fn add_scaled(&self, s: f64, d: &Self) -> Self {
        Self {
            x: self.x.add_scaled(s, &d.x),
            y: self.y.add_scaled(s, &d.y),
            v: self.v.add_scaled(s, &d.v),
        }
    }
    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.v.is_finite()
    }
}

impl OdeStateXQ {
    /// `(X, X Y + V)`.
    pub fn from_xyv(s: &OdeStateXYV) -> Self {
        Self { x: s.x.clone(), q: &s.x.matmul(&s.y) + &s.v }
    }

    /// `(‖XᵀX − I‖, ‖XᵀQ + QᵀX‖)`.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        let xtq = self.x.t_matmul(&self.q);
        (crate::manifold::feasibility(&self.x), (&xtq + &xtq.transpose()).frobenius_norm())
    }
}

impl OdeStateXYV {
    /// `Y = XᵀQ`, `V = Q − XY`.
    pub fn from_xq(s: &OdeStateXQ) -> Self {
        let y = s.x.t_matmul(&s.q);
        let v = &s.q - &s.x.matmul(&y);
        Self { x: s.x.clone(), y, v }
    }

    /// `(‖XᵀX − I‖, ‖Y + Yᵀ‖, ‖XᵀV‖)`.
    pub fn constraint_residuals(&self) -> (f64, f64, f64) {
        let e = crate::manifold::structure_errors(&self.x, &self.y, &self.v);
        (e.feas, e.skew, e.perp)
    }

    /// Largest of the three constraint residuals.
    pub fn max_residual(&self) -> f64 {
        let (a, b, c) = self.constraint_residuals();
        a.max(b).max(c)
    }
}

/// Right-hand side of the `(X, Q)` dynamics; `g` is `∂f/∂X` at `s.x`.
pub fn xq_field(s: &OdeStateXQ, g: &Matrix, gamma: f64, mp: MetricParams) -> OdeStateXQ {
    let (a, b) = (mp.a(), mp.b());
    let x = &s.x;
    let q = &s.q;
    let qtx = q.t_matmul(x);
    let qqtx = q.matmul(&qtx);
    let perp_qqtx = &qqtx - &x.matmul(&x.t_matmul(&qqtx));
    let mut dq = q.scale(-gamma);
    dq.axpy(-1.0, &x.matmul(&q.t_matmul(q)));
    dq.axpy(-1.5 * a, &perp_qqtx);
    dq -= g;
    dq.axpy(0.5 * (1.0 + b), &x.matmul(&x.t_matmul(g)));
    dq.axpy(0.5 * (1.0 - b), &x.matmul(&g.t_matmul(x)));
    OdeStateXQ { x: q.clone(), q: dq }
}

/// Right-hand side of the `(X, Y, V)` dynamics.
pub fn xyv_field(s: &OdeStateXYV, g: &Matrix, gamma: f64, mp: MetricParams) -> OdeStateXYV {
    let mut out = split_field(1, s, g, gamma, mp);
    for k in [2, 3] {
        out = out.add_scaled(1.0, &split_field(k, s, g, gamma, mp));
    }
    out
}

/// One of the three split fields.
///
/// 1. `Ẋ = XY`, `Ẏ = −γY − fY`, `V̇ = 0`
/// 2. `Ẋ = 0`, `Ẏ = 0`, `V̇ = −γV + (3a−2)/2 VY − gV`
/// 3. `Ẋ = V`, `Ẏ = 0`, `V̇ = −X VᵀV`
///
/// # Panics
/// If `k` is not 1, 2 or 3.
pub fn split_field(k: u8, s: &OdeStateXYV, g: &Matrix, gamma: f64, mp: MetricParams) -> OdeStateXYV {
    let (n, m) = s.x.shape();
    let zx = || Matrix::zeros(n, m);
    let zy = || Matrix::zeros(m, m);
    match k {
        1 => {
            let (fy, _) = gradient_terms(&s.x, g, mp);
            OdeStateXYV {
                x: s.x.matmul(&s.y),
                y: &s.y.scale(-gamma) - &fy,
                v: zx(),
            }
        }
        2 => {
            let (_, gv) = gradient_terms(&s.x, g, mp);
            let mut dv = s.v.scale(-gamma);
            dv.axpy(0.5 * (3.0 * mp.a() - 2.0), &s.v.matmul(&s.y));
            dv -= &gv;
            OdeStateXYV { x: zx(), y: zy(), v: dv }
        }
        3 => OdeStateXYV {
            x: s.v.clone(),
            y: zy(),
            v: s.x.matmul(&s.v.t_matmul(&s.v)).scale(-1.0),
        },
        _ => panic!("split index must be 1, 2 or 3, got {k}"),
    }
}

/// Exact flow of split field 2 for time `t`, with `X` and `Y` frozen:
///
/// ```text
/// V(t) = V₀ e^{−Mt} − gV M^{-1} (I − e^{−Mt}),   M = γI − (3a−2)/2 · Y₀
/// ```
pub fn phi2_exact(s: &OdeStateXYV, g: &Matrix, gamma: f64, mp: MetricParams, t: f64) -> Result<OdeStateXYV> {
    if t == 0.0 {
        return Ok(s.clone());
    }
    let m = s.y.rows();
    let kappa = 0.5 * (3.0 * mp.a() - 2.0);
    let big_m = Matrix::from_fn(m, m, |i, j| if i == j { gamma } else { 0.0 }).add_scaled(-kappa, &s.y);
    let decay = expm(&big_m.scale(-t))?;
    let forcing = big_m
        .solve(&(&Matrix::identity(m) - &decay))
        .map_err(|_| Error::Singular("M = γI − (3a−2)/2·Y is singular"))?;
    let (_, gv) = gradient_terms(&s.x, g, mp);
    let v = &s.v.matmul(&decay) - &gv.matmul(&forcing);
    v.ensure_finite("exact perpendicular flow")?;
    Ok(OdeStateXYV { x: s.x.clone(), y: s.y.clone(), v })
}

/// Classical fourth-order Runge–Kutta with fixed step. The final step is
/// shortened so the integration ends exactly at `t_end`.
pub fn reference_integrate<S, F>(mut field: F, s0: &S, t_end: f64, dt: f64) -> Result<S>
where
    S: VectorState,
    F: FnMut(&S) -> S,
{
    reference_trajectory(&mut field, s0, t_end, dt, |_, _| {})
}

/// As [`reference_integrate`], calling `observe(t, state)` after every step
/// and once at `t = 0`.
pub fn reference_trajectory<S, F, O>(field: &mut F, s0: &S, t_end: f64, dt: f64, mut observe: O) -> Result<S>
where
    S: VectorState,
    F: FnMut(&S) -> S,
    O: FnMut(f64, &S),
{
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("need dt > 0 and T >= 0, got dt={dt}, T={t_end}")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as u64;
    let mut s = s0.clone();
    observe(0.0, &s);
    for k in 0..steps {
        let t = k as f64 * dt;
        let h = dt.min(t_end - t);
        let k1 = field(&s);
        let k2 = field(&s.add_scaled(0.5 * h, &k1));
        let k3 = field(&s.add_scaled(0.5 * h, &k2));
        let k4 = field(&s.add_scaled(h, &k3));
        s = s
            .add_scaled(h / 6.0, &k1)
            .add_scaled(h / 3.0, &k2)
            .add_scaled(h / 3.0, &k3)
            .add_scaled(h / 6.0, &k4);
        if !s.is_finite() {
            return Err(Error::NonFinite("reference integrator state"));
        }
        observe(t + h, &s);
    }
    Ok(s)
}

/// `½ Tr(Qᵀ(I − aXXᵀ)Q) + f`.
pub fn energy(s: &OdeStateXQ, f_value: f64, mp: MetricParams) -> f64 {
    0.5 * kinetic(s, mp) + f_value
}

/// `Tr(Qᵀ(I − aXXᵀ)Q)`; the energy decays at rate `γ` times this.
pub fn kinetic(s: &OdeStateXQ, mp: MetricParams) -> f64 {
    let xtq = s.x.t_matmul(&s.q);
    s.q.dot(&s.q) - mp.a() * xtq.dot(&xtq)
}

/// Least-squares slope of `ln err` against `ln h`.
pub fn fit_log_slope(hs: &[f64], errs: &[f64]) -> Result<f64> {
    if hs.len() != errs.len() || hs.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} step sizes, {} errors", hs.len(), errs.len())));
    }
    if let Some(e) = errs.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::DegenerateFit(format!("error {e:e} is not positive and finite")));
    }
    if hs.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::DegenerateFit("step sizes must be positive".into()));
    }
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 {
        return Err(Error::DegenerateFit("step sizes are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Global-error order of a one-step map.
///
/// For each `h`, `step(state, h)` is applied `round(t_end / h)` times from
/// `s0` and compared with `reference` through `dist`. Returns the fitted
/// slope and the individual errors.
pub fn estimate_order<S, M, D>(
    mut step: M,
    reference: &S,
    s0: &S,
    t_end: f64,
    hs: &[f64],
    mut dist: D,
) -> Result<(f64, Vec<f64>)>
where
    S: Clone,
    M: FnMut(&S, f64) -> Result<S>,
    D: FnMut(&S, &S) -> f64,
{
    if hs.len() < 3 || hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("need at least three strictly decreasing step sizes".into()));
    }
    let mut errs = Vec::with_capacity(hs.len());
    for &h in hs {
        let n = (t_end / h).round() as u64;
        if ((n as f64) * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
            return Err(Error::InvalidInput(format!("step {h} does not divide T = {t_end}")));
        }
        let mut s = s0.clone();
        for _ in 0..n {
            s = step(&s, h)?;
        }
        errs.push(dist(&s, reference));
    }
    Ok((fit_log_slope(hs, &errs)?, errs))
}

/// One step of the composed momentum SGD map read as a time-`h` integrator
/// of the `(X, Y, V)` dynamics. Momenta are rescaled to `Z = Y/c`, `U = V/c`
/// with `c = (1 − e^{−γh})/γ` and back.
pub fn sgd_as_integrator(s: &OdeStateXYV, g: &Matrix, gamma: f64, h: f64, template: &SgdHyper) -> Result<OdeStateXYV> {
    let r = Rescaling::new(gamma, h)?;
    let c = r.scale();
    let hyper = SgdHyper { eta: r.eta(), mu: r.mu(), ..*template };
    let state = SgdState::from_parts(s.x.clone(), s.y.scale(1.0 / c), s.v.scale(1.0 / c))?;
    let next = sgd_update(&state, g, &hyper)?;
    Ok(OdeStateXYV { x: next.x, y: next.z.scale(c), v: next.u.scale(c) })
}

/// `max(‖ΔX‖, ‖ΔY‖, ‖ΔV‖)`.
pub fn xyv_distance(a: &OdeStateXYV, b: &OdeStateXYV) -> f64 {
    (&a.x - &b.x)
        .frobenius_norm()
        .max((&a.y - &b.y).frobenius_norm())
        .max((&a.v - &b.v).frobenius_norm())
}

/// Quadratic test objective `f(X) = −Tr(XᵀAX)` used by the self-checks.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    pub a: Matrix,
}

impl QuadraticObjective {
    /// `A = (Ξ + Ξᵀ)/2/√n` for Gaussian `Ξ`.
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let xi = rng.gaussian_matrix(n, n);
        let a = (&xi + &xi.transpose()).scale(0.5 / (n as f64).sqrt());
        Self { a }
    }

    pub fn value(&self, x: &Matrix) -> f64 {
        -x.dot(&self.a.matmul(x))
    }

    pub fn gradient(&self, x: &Matrix) -> Matrix {
        self.a.matmul(x).scale(-2.0)
    }
}

/// Random on-manifold `(X, Y, V)` with momenta of Frobenius norm `scale`.
pub fn random_xyv(n: usize, m: usize, scale: f64, rng: &mut Rng) -> Result<OdeStateXYV> {
    let x = crate::linalg::orthogonal_init(n, m, rng)?;
    let y = rng.gaussian_matrix(m, m).skew_part();
    let r = rng.gaussian_matrix(n, m);
    let v = &r - &x.matmul(&x.t_matmul(&r));
    let norm = |a: &Matrix| a.frobenius_norm().max(f64::MIN_POSITIVE);
    let y = y.scale(scale / norm(&y));
    let v = if n > m { v.scale(scale / norm(&v)) } else { Matrix::zeros(n, m) };
    Ok(OdeStateXYV { x, y, v })
}

/// Sizes and tolerances for [`ode_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct OdeCheckConfig {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub a: f64,
    pub gammas: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub order_t_end: f64,
    pub order_hs: Vec<f64>,
    pub order_dt: f64,
    pub tol: f64,
}

impl Default for OdeCheckConfig {
    fn default() -> Self {
        Self {
            n: 20,
            m: 5,
            seed: 0,
            a: 0.5,
            gammas: vec![0.5, 1.0, 5.0],
            t_end: 5.0,
            dt: 1e-3,
            order_t_end: 1.0,
            order_hs: vec![1e-2, 5e-3, 2.5e-3],
            order_dt: 1e-4,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeCheckReport {
    /// Fitted global order of the composed SGD map.
    pub order: f64,
    pub order_errors: Vec<f64>,
    /// Largest constraint residual seen along any reference trajectory.
    pub max_drift: f64,
    /// Largest increase of the energy between consecutive samples.
    pub max_energy_increase: f64,
    /// `‖Q − (XY + V)‖` at the end of matched `(X, Q)` / `(X, Y, V)` runs.
    pub xq_xyv_gap: f64,
}

impl OdeCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        (0.8..=1.2).contains(&self.order) && self.max_drift <= tol && self.max_energy_increase <= tol
    }
}

/// Constraint drift and energy dissipation along reference trajectories of
/// both state forms for each friction value, plus the order of the composed
/// SGD map at `γ = 1` (or the first listed friction if 1 is absent).
pub fn ode_check(cfg: &OdeCheckConfig) -> Result<OdeCheckReport> {
    if cfg.gammas.is_empty() {
        return Err(Error::InvalidInput("no friction values".into()));
    }
    for &g in &cfg.gammas {
        Friction::new(g)?;
    }
    if cfg.m == 0 || cfg.n < cfg.m {
        return Err(Error::InvalidInput(format!("need n >= m >= 1, got n={}, m={}", cfg.n, cfg.m)));
    }
    let mp = MetricParams::new(cfg.a)?;
    let mut rng = Rng::new(cfg.seed);
    let obj = QuadraticObjective::random(cfg.n, &mut rng);
    let s0 = random_xyv(cfg.n, cfg.m, 1.0, &mut rng)?;

    let mut max_drift: f64 = 0.0;
    let mut max_rise: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let sample_every = ((cfg.t_end / cfg.dt) / 100.0).ceil().max(1.0) as u64;
    for &gamma in &cfg.gammas {
        let xq0 = OdeStateXQ::from_xyv(&s0);
        let mut field = |s: &OdeStateXQ| xq_field(s, &obj.gradient(&s.x), gamma, mp);
        let mut prev_e = f64::INFINITY;
        let mut k = 0u64;
        let end_xq = reference_trajectory(&mut field, &xq0, cfg.t_end, cfg.dt, |_, s| {
            let (feas, tang) = s.constraint_residuals();
            max_drift = max_drift.max(feas).max(tang);
            if k % sample_every == 0 {
                let e = energy(s, obj.value(&s.x), mp);
                max_rise = max_rise.max(e - prev_e);
                prev_e = e;
            }
            k += 1;
        })?;

        let mut field = |s: &OdeStateXYV| xyv_field(s, &obj.gradient(&s.x), gamma, mp);
        let end_xyv = reference_trajectory(&mut field, &s0, cfg.t_end, cfg.dt, |_, s| {
            max_drift = max_drift.max(s.max_residual());
        })?;
        gap = gap.max((&end_xq.q - &OdeStateXQ::from_xyv(&end_xyv).q).frobenius_norm());
    }

    let gamma = if cfg.gammas.contains(&1.0) { 1.0 } else { cfg.gammas[0] };
    let template = SgdHyper::new(0.1, 0.5)?.with_metric(mp);
    let mut field = |s: &OdeStateXYV| xyv_field(s, &obj.gradient(&s.x), gamma, mp);
    let reference = reference_integrate(&mut field, &s0, cfg.order_t_end, cfg.order_dt)?;
    let (order, order_errors) = estimate_order(
        |s, h| sgd_as_integrator(s, &obj.gradient(&s.x), gamma, h, &template),
        &reference,
        &s0,
        cfg.order_t_end,
        &cfg.order_hs,
        xyv_distance,
    )?;

    Ok(OdeCheckReport {
        order,
        order_errors,
        max_drift,
        max_energy_increase: max_rise,
        xq_xyv_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(seed: u64) -> (OdeStateXYV, Matrix) {
        let mut rng = Rng::new(seed);
        let s = random_xyv(9, 3, 0.7, &mut rng).unwrap();
        let g = rng.gaussian_matrix(9, 3);
        (s, g)
    }

    #[test]
    fn scalar_decay() {
        let x = reference_integrate(|x: &f64| -x, &1.0, 1.0, 1e-3).unwrap();
        assert!((x - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(reference_integrate(|x: &f64| -x, &3.0, 0.0, 1e-3).unwrap(), 3.0);
    }

    #[test]
    fn split_fields_sum_to_full_field() {
        let mp = MetricParams::canonical();
        for seed in 0..50 {
            let (s, g) = setup(seed);
            let full = xyv_field(&s, &g, 0.8, mp);
            let parts = [1, 2, 3].map(|k| split_field(k, &s, &g, 0.8, mp));
            let sum = parts[0].add_scaled(1.0, &parts[1]).add_scaled(1.0, &parts[2]);
            assert!(xyv_distance(&full, &sum) <= 1e-14);
        }
    }

    #[test]
    fn split_trivia() {
        let (mut s, g) = setup(1);
        let mp = MetricParams::canonical();
        assert_eq!(split_field(1, &s, &g, 1.0, mp).v, Matrix::zeros(9, 3));
        s.v = Matrix::zeros(9, 3);
        let f3 = split_field(3, &s, &g, 1.0, mp);
        assert_eq!(f3.x.max_abs() + f3.y.max_abs() + f3.v.max_abs(), 0.0);
    }

    #[test]
    fn xyv_matches_xq_on_matched_states() {
        for a in [0.0, 0.5, -1.0, 2.0 / 3.0] {
            let mp = MetricParams::new(a).unwrap();
            let (s, g) = setup(2);
            let d = xyv_field(&s, &g, 1.3, mp);
            // d(XY + V)/dt = Ẋ Y + X Ẏ + V̇
            let dq = &(&d.x.matmul(&s.y) + &s.x.matmul(&d.y)) + &d.v;
            let e = xq_field(&OdeStateXQ::from_xyv(&s), &g, 1.3, mp);
            assert!((&dq - &e.q).frobenius_norm() < 1e-12, "a={a}");
        }
    }

    #[test]
    fn two_thirds_metric_drops_rotation_coupling() {
        let (s, _) = setup(3);
        let g = Matrix::zeros(9, 3);
        let mp = MetricParams::new(2.0 / 3.0).unwrap();
        let d = split_field(2, &s, &g, 0.4, mp);
        assert!((&d.v - &s.v.scale(-0.4)).max_abs() < 1e-15);
    }

    #[test]
    fn xq_field_keeps_tangency_to_first_order() {
        let mp = MetricParams::canonical();
        let (s, g) = setup(4);
        let xq = OdeStateXQ::from_xyv(&s);
        let d = xq_field(&xq, &g, 1.0, mp);
        // d/dt (XᵀQ + QᵀX) = QᵀQ·2 + XᵀQ̇ + Q̇ᵀX must vanish on the manifold
        let dxq = &(&d.x.t_matmul(&xq.q) + &xq.x.t_matmul(&d.q)) + &(&xq.q.t_matmul(&d.x) + &d.q.t_matmul(&xq.x));
        assert!(dxq.frobenius_norm() < 1e-12);
        let dxx = &xq.x.t_matmul(&d.x) + &d.x.t_matmul(&xq.x);
        assert!(dxx.frobenius_norm() < 1e-12);
    }

    #[test]
    fn euclidean_square_case_has_no_perpendicular_coupling() {
        // a = 0, n = m: the (3a/2) term vanishes and the field is the SO(n) one
        let mut rng = Rng::new(5);
        let x = crate::linalg::orthogonal_init(4, 4, &mut rng).unwrap();
        let q = x.matmul(&rng.gaussian_matrix(4, 4).skew_part());
        let g = rng.gaussian_matrix(4, 4);
        let s = OdeStateXQ { x: x.clone(), q: q.clone() };
        let d = xq_field(&s, &g, 0.3, MetricParams::euclidean());
        let mut want = q.scale(-0.3);
        want.axpy(-1.0, &x.matmul(&q.t_matmul(&q)));
        want -= &g;
        want.axpy(0.5, &x.matmul(&x.t_matmul(&g)));
        want.axpy(0.5, &x.matmul(&g.t_matmul(&x)));
        assert!((&d.q - &want).frobenius_norm() < 1e-12);
    }

    #[test]
    fn phi2_exact_trivia_and_semigroup() {
        let mp = MetricParams::canonical();
        let (mut s, g) = setup(6);
        assert_eq!(phi2_exact(&s, &g, 1.0, mp, 0.0).unwrap(), s);

        let a = phi2_exact(&phi2_exact(&s, &g, 1.0, mp, 0.3).unwrap(), &g, 1.0, mp, 0.2).unwrap();
        let b = phi2_exact(&s, &g, 1.0, mp, 0.5).unwrap();
        assert!(xyv_distance(&a, &b) < 1e-10);

        s.y = Matrix::zeros(3, 3);
        let d = phi2_exact(&s, &Matrix::zeros(9, 3), 0.7, mp, 0.4).unwrap();
        assert!((&d.v - &s.v.scale((-0.28f64).exp())).max_abs() < 1e-14);
    }

    #[test]
    fn phi2_exact_matches_reference_flow() {
        let mp = MetricParams::canonical();
        let (s, g) = setup(7);
        let exact = phi2_exact(&s, &g, 1.0, mp, 0.1).unwrap();
        let rk = reference_integrate(|t: &OdeStateXYV| split_field(2, t, &g, 1.0, mp), &s, 0.1, 1e-3).unwrap();
        assert!(xyv_distance(&exact, &rk) < 1e-10);
    }

    #[test]
    fn phi2_exact_reports_singular_generator() {
        // M = γI − (3a−2)/2·Y is singular for γ = 0, Y = 0
        let (mut s, g) = setup(8);
        s.y = Matrix::zeros(3, 3);
        assert!(matches!(phi2_exact(&s, &g, 0.0, MetricParams::canonical(), 0.1), Err(Error::Singular(_))));
    }

    #[test]
    fn energy_trivia() {
        let (s, _) = setup(9);
        let xq = OdeStateXQ::from_xyv(&s);
        let zero = OdeStateXQ { x: xq.x.clone(), q: Matrix::zeros(9, 3) };
        assert_eq!(energy(&zero, 2.5, MetricParams::canonical()), 2.5);
        let e0 = energy(&xq, 1.0, MetricParams::euclidean());
        assert!((e0 - (0.5 * xq.q.dot(&xq.q) + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn forward_euler_is_first_order_and_rk4_fourth() {
        let reference = (-1.0f64).exp();
        let (slope, _) = estimate_order(|x: &f64, h| Ok(x - h * x), &reference, &1.0, 1.0, &[0.1, 0.05, 0.025, 0.0125], |a, b| (a - b).abs()).unwrap();
        assert!((slope - 1.0).abs() < 0.1, "{slope}");

        let tight = reference_integrate(|x: &f64| -x, &1.0, 1.0, 1e-4).unwrap();
        let (slope, _) = estimate_order(
            |x: &f64, h| reference_integrate(|y: &f64| -y, x, h, h),
            &tight,
            &1.0,
            1.0,
            &[0.2, 0.1, 0.05],
            |a, b| (a - b).abs(),
        )
        .unwrap();
        assert!((slope - 4.0).abs() < 0.3, "{slope}");
    }

    #[test]
    fn degenerate_fits_are_reported() {
        assert!(matches!(fit_log_slope(&[0.1, 0.05], &[0.0, 0.0]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_log_slope(&[0.1, 0.1], &[1.0, 2.0]), Err(Error::DegenerateFit(_))));
        assert!(estimate_order(|x: &f64, _| Ok(*x), &0.0, &0.0, 1.0, &[0.1, 0.05], |a, b| (a - b).abs()).is_err());
    }

    #[test]
    fn friction_must_be_positive() {
        assert!(Friction::new(0.0).is_err());
        assert!(Friction::new(-1.0).is_err());
        assert_eq!(Friction::new(2.0).unwrap().gamma(), 2.0);
    }
}
