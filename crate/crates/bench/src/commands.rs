//! The four subcommands, each driven by merged [`Settings`].

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use stiefel::dynamics::{ode_check, Friction, OdeCheckConfig};
use stiefel::linalg::{orthogonal_init, Matrix, Rng};
use stiefel::optimizers::{
    run, AdamHyper, AnyOptimizer, Objective, OptimizerKind, Phi1Mode, Phi2Mode, SgdHyper, Trace,
};
use stiefel::problems::{
    largest_principal_angle, lev_generate, lev_value_grad, load_point_cloud, load_weights, prw_solve,
    two_gaussians, two_gaussians_plane, PrwConfig, PrwProblem, SinkhornConfig, SINKHORN_DEFAULT_MAX_ITER,
    SINKHORN_DEFAULT_TOL,
};
use stiefel::{MetricParams, StiefelPoint};

use crate::config::{invalid, CliError, Settings};

const OPTIMIZER_KEYS: [&str; 15] = [
    "n", "m", "seed", "opt", "eta", "mu", "beta1", "beta2", "eps", "a", "phi1", "phi2", "iters", "trace-every", "out",
];

/// Optimizer selection and hyperparameters shared by `lev`, `prw` and `sweep`.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub sgd: SgdHyper,
    pub adam: AdamHyper,
}

/// `sgd_defaults` is `(η, μ)` for the momentum methods; the Adam family
/// defaults to `η = 1e-3`.
fn optimizer_settings(s: &Settings, sgd_defaults: (f64, f64)) -> Result<OptimizerSettings, CliError> {
    let kind: OptimizerKind = s.get_or("opt", OptimizerKind::Sgd)?;
    let adam_family = matches!(kind, OptimizerKind::Adam | OptimizerKind::SonAdam);
    let eta_default = if adam_family { AdamHyper::default().eta } else { sgd_defaults.0 };
    let eta = s.get_or("eta", eta_default)?;
    let metric = MetricParams::new(s.get_or("a", MetricParams::default().a())?).map_err(invalid)?;

    let sgd = SgdHyper::new(eta, s.get_or("mu", sgd_defaults.1)?)
        .map_err(invalid)?
        .with_metric(metric)
        .with_modes(s.get_or("phi1", Phi1Mode::ForwardEuler)?, s.get_or("phi2", Phi2Mode::ForwardEuler)?);
    let d = AdamHyper::default();
    let adam = AdamHyper::new(eta, s.get_or("beta1", d.beta1)?, s.get_or("beta2", d.beta2)?, s.get_or("eps", d.eps)?)
        .map_err(invalid)?
        .with_metric(metric);
    Ok(OptimizerSettings { kind, sgd, adam })
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, trace.to_csv()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn dims(s: &Settings, n: usize, m: usize) -> Result<(usize, usize), CliError> {
    let (n, m) = (s.get_or("n", n)?, s.get_or("m", m)?);
    if m == 0 || n < m {
        return Err(CliError::Config(format!("need n >= m >= 1, got n={n}, m={m}")));
    }
    Ok((n, m))
}

/// One LEV run as used by both `lev` and every `sweep` cell.
#[derive(Clone, Copy, Debug)]
pub struct LevJob {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub iters: u64,
    pub trace_every: u64,
    pub opt: OptimizerSettings,
}

pub struct LevOutcome {
    pub trace: Trace,
    /// Sum of the top `m` eigenvalues, from one dense eigendecomposition.
    pub top: f64,
}

impl LevOutcome {
    pub fn gap(&self, row_objective: f64) -> f64 {
        self.top + row_objective
    }
}

/// On a numeric failure the partial trace comes back with the error.
pub fn lev_run(job: &LevJob) -> Result<LevOutcome, (Option<Trace>, CliError)> {
    let mut rng = Rng::new(job.seed);
    let p = lev_generate(job.n, job.m, &mut rng).map_err(|e| (None, invalid(e)))?;
    let x0 = orthogonal_init(job.n, job.m, &mut rng).map_err(|e| (None, e.into()))?;
    let x0 = StiefelPoint::new(x0).map_err(|e| (None, e.into()))?;
    let mut opt = AnyOptimizer::new(job.opt.kind, x0, job.opt.sgd, job.opt.adam).map_err(|e| (None, invalid(e)))?;
    let top = p.top_eigen_sum();
    let mut oracle = Objective(|x: &Matrix| lev_value_grad(&p, x).expect("shapes fixed by construction"));
    match run(&mut opt, &mut oracle, job.iters, job.trace_every) {
        Ok(trace) => Ok(LevOutcome { trace, top }),
        Err(f) => {
            let msg = format!("iteration {}: {}", f.iter, f.error);
            Err((Some(f.trace), CliError::Numeric(msg)))
        }
    }
}

fn lev_job(s: &Settings) -> Result<LevJob, CliError> {
    let (n, m) = dims(s, 100, 10)?;
    let opt = optimizer_settings(s, (0.1, 0.9))?;
    if matches!(opt.kind, OptimizerKind::SonSgd | OptimizerKind::SonAdam) && n != m {
        return Err(CliError::Config(format!("{} needs n = m, got n={n}, m={m}", opt.kind)));
    }
    Ok(LevJob {
        n,
        m,
        seed: s.get_or("seed", 0)?,
        iters: s.get_or("iters", 3000)?,
        trace_every: s.get_or("trace-every", 1)?,
        opt,
    })
}

fn out_path(s: &Settings, default: &str) -> Result<PathBuf, CliError> {
    Ok(PathBuf::from(s.get_or("out", default.to_string())?))
}

pub fn cmd_lev(s: &Settings) -> Result<(), CliError> {
    let mut keys = OPTIMIZER_KEYS.to_vec();
    keys.push("timing-ns");
    s.check_known(&keys)?;
    if s.contains("timing-ns") {
        return lev_timing(s);
    }
    let job = lev_job(s)?;
    let out = out_path(s, "lev.csv")?;
    let outcome = match lev_run(&job) {
        Ok(o) => o,
        Err((partial, e)) => {
            if let Some(t) = partial {
                write_trace(&out, &t)?;
            }
            return Err(e);
        }
    };
    write_trace(&out, &outcome.trace)?;
    let last = outcome.trace.last().expect("a run records iteration 0");
    let worst = outcome.trace.max_structure();
    println!(
        "lev n={} m={} seed={} opt={} iters={} objective={:.16e} gap={:.3e} max_feas={:.3e} max_skew={:.3e} max_perp={:.3e} wall_ms={:.1}",
        job.n,
        job.m,
        job.seed,
        job.opt.kind,
        last.iter,
        last.objective,
        outcome.gap(last.objective),
        worst.feas,
        worst.skew,
        worst.perp,
        last.wall_ns as f64 / 1e6
    );
    Ok(())
}

/// Per-iteration optimizer cost for each `n` at fixed `m`. The oracle
/// returns one precomputed gradient so only the update itself is timed.
fn lev_timing(s: &Settings) -> Result<(), CliError> {
    let ns: Vec<usize> = s.list("timing-ns")?.unwrap_or_default();
    if ns.len() < 2 {
        return Err(CliError::Config("timing-ns needs at least two sizes".into()));
    }
    let m: usize = s.get_or("m", 10)?;
    let iters: u64 = s.get_or("iters", 100)?;
    if iters == 0 {
        return Err(CliError::Config("timing needs iters >= 1".into()));
    }
    let seed: u64 = s.get_or("seed", 0)?;
    let opt = optimizer_settings(s, (0.1, 0.9))?;
    let mut csv = String::from("n,m,iters,per_iter_ns\n");
    let mut points = Vec::new();
    for &n in &ns {
        if m == 0 || n < m {
            return Err(CliError::Config(format!("need n >= m >= 1, got n={n}, m={m}")));
        }
        let mut rng = Rng::new(seed);
        let x0 = StiefelPoint::new(orthogonal_init(n, m, &mut rng)?)?;
        let g = rng.gaussian_matrix(n, m).scale(1.0 / (n as f64).sqrt());
        let mut o = AnyOptimizer::new(opt.kind, x0, opt.sgd, opt.adam).map_err(invalid)?;
        let mut oracle = |_: &Matrix| g.clone();
        let trace = run(&mut o, &mut oracle, iters, iters).map_err(|f| CliError::Numeric(f.to_string()))?;
        let per_iter = trace.last().expect("nonempty").wall_ns as f64 / iters as f64;
        println!("timing n={n} m={m} iters={iters} per_iter_us={:.2}", per_iter / 1e3);
        csv.push_str(&format!("{n},{m},{iters},{per_iter:.0}\n"));
        points.push((n as f64, per_iter));
    }
    let (hs, ts): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let slope = stiefel::dynamics::fit_log_slope(&hs, &ts)?;
    println!("timing slope={slope:.3}");
    let out = out_path(s, "lev_timing.csv")?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&out, csv).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

pub fn cmd_prw(s: &Settings) -> Result<(), CliError> {
    let mut keys = OPTIMIZER_KEYS.to_vec();
    keys.extend([
        "d", "k", "points", "reg", "x-file", "y-file", "r-file", "c-file", "inner-steps", "sinkhorn-tol",
        "sinkhorn-max-iter",
    ]);
    s.check_known(&keys)?;
    let seed: u64 = s.get_or("seed", 0)?;
    let reg: f64 = s.get_or("reg", 1.0)?;
    let k: usize = s.get_or("k", 2)?;
    let opt = optimizer_settings(s, (1e-3, 0.5))?;
    let cfg = PrwConfig {
        kind: opt.kind,
        sgd: opt.sgd,
        adam: opt.adam,
        n_outer: s.get_or("iters", 200)?,
        inner_steps: s.get_or("inner-steps", 1)?,
        sinkhorn: SinkhornConfig {
            tol: s.get_or("sinkhorn-tol", SINKHORN_DEFAULT_TOL)?,
            max_iter: s.get_or("sinkhorn-max-iter", SINKHORN_DEFAULT_MAX_ITER)?,
            force_log: false,
        },
    };
    let mut rng = Rng::new(seed);
    let (p, synthetic) = match (s.raw("x-file"), s.raw("y-file")) {
        (Some(xf), Some(yf)) => {
            let xs = load_point_cloud(Path::new(xf))?;
            let ys = load_point_cloud(Path::new(yf))?;
            let r = match s.raw("r-file") {
                Some(f) => load_weights(Path::new(f))?,
                None => vec![1.0 / xs.rows() as f64; xs.rows()],
            };
            let c = match s.raw("c-file") {
                Some(f) => load_weights(Path::new(f))?,
                None => vec![1.0 / ys.rows() as f64; ys.rows()],
            };
            (PrwProblem::new(xs, ys, r, c, k, reg).map_err(invalid)?, false)
        }
        (None, None) => {
            if s.contains("r-file") || s.contains("c-file") {
                return Err(CliError::Config("weight files need x-file and y-file".into()));
            }
            if k != 2 {
                return Err(CliError::Config(format!("the synthetic instance uses k = 2, got {k}")));
            }
            let d: usize = s.get_or("d", 10)?;
            (two_gaussians(s.get_or("points", 200)?, d, reg, &mut rng).map_err(invalid)?, true)
        }
        _ => return Err(CliError::Config("x-file and y-file must be given together".into())),
    };
    if p.k > p.d() {
        return Err(CliError::Config(format!("need k <= d, got k={}, d={}", p.k, p.d())));
    }
    if matches!(opt.kind, OptimizerKind::SonSgd | OptimizerKind::SonAdam) && p.k != p.d() {
        return Err(CliError::Config(format!("{} needs k = d", opt.kind)));
    }
    let u0 = StiefelPoint::new(orthogonal_init(p.d(), p.k, &mut rng)?)?;
    let out = out_path(s, "prw.csv")?;
    let result = prw_solve(&p, u0, &cfg)?;
    write_trace(&out, &result.trace)?;
    let worst = result.residuals.iter().copied().fold(0.0, f64::max);
    let mut line = format!(
        "prw d={} k={} N={} opt={} outer={} value={:.16e} max_marginal_residual={:.3e}",
        p.d(),
        p.k,
        p.xs.rows(),
        opt.kind,
        cfg.n_outer,
        result.value,
        worst
    );
    if synthetic {
        let angle = largest_principal_angle(result.u.matrix(), &two_gaussians_plane(p.d()))?;
        line.push_str(&format!(" plane_angle={angle:.3e}"));
    }
    println!("{line}");
    Ok(())
}

pub fn cmd_ode_check(s: &Settings) -> Result<(), CliError> {
    s.check_known(&["n", "m", "seed", "a", "gammas", "t-end", "dt", "order-t-end", "order-hs", "order-dt", "tol"])?;
    let d = OdeCheckConfig::default();
    let cfg = OdeCheckConfig {
        n: s.get_or("n", d.n)?,
        m: s.get_or("m", d.m)?,
        seed: s.get_or("seed", d.seed)?,
        a: s.get_or("a", d.a)?,
        gammas: s.list("gammas")?.unwrap_or(d.gammas),
        t_end: s.get_or("t-end", d.t_end)?,
        dt: s.get_or("dt", d.dt)?,
        order_t_end: s.get_or("order-t-end", d.order_t_end)?,
        order_hs: s.list("order-hs")?.unwrap_or(d.order_hs),
        order_dt: s.get_or("order-dt", d.order_dt)?,
        tol: s.get_or("tol", d.tol)?,
    };
    if cfg.gammas.is_empty() {
        return Err(CliError::Config("gammas is empty".into()));
    }
    for &g in &cfg.gammas {
        Friction::new(g).map_err(invalid)?;
    }
    MetricParams::new(cfg.a).map_err(invalid)?;
    if cfg.m == 0 || cfg.n < cfg.m {
        return Err(CliError::Config(format!("need n >= m >= 1, got n={}, m={}", cfg.n, cfg.m)));
    }
    for (name, v) in [("t-end", cfg.t_end), ("dt", cfg.dt), ("order-t-end", cfg.order_t_end), ("order-dt", cfg.order_dt)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Config(format!("{name} must be positive, got {v}")));
        }
    }
    let r = ode_check(&cfg).map_err(|e| match e {
        stiefel::Error::InvalidInput(m) => CliError::Config(m),
        e => e.into(),
    })?;
    println!("ode-check n={} m={} a={} gammas={:?} T={}", cfg.n, cfg.m, cfg.a, cfg.gammas, cfg.t_end);
    println!("estimated order: {:.4} (errors {:?})", r.order, r.order_errors);
    println!("max constraint drift: {:.3e}", r.max_drift);
    println!("max energy increase: {:.3e}", r.max_energy_increase);
    println!("xq/xyv trajectory gap: {:.3e}", r.xq_xyv_gap);
    if r.passes(cfg.tol) {
        println!("ode-check PASS (tol {:e}, order in [0.8, 1.2])", cfg.tol);
        Ok(())
    } else {
        Err(CliError::Numeric(format!("ode-check exceeded tolerance {:e} or order left [0.8, 1.2]", cfg.tol)))
    }
}

/// Worker count for the sweep from `STIEFEL_OPT_THREADS`; rayon's default otherwise.
fn sweep_threads() -> Result<Option<usize>, CliError> {
    match std::env::var("STIEFEL_OPT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::Config(format!("STIEFEL_OPT_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn fmt_a(a: f64) -> String {
    format!("{a}").replace('-', "m")
}

pub fn cmd_sweep(s: &Settings) -> Result<(), CliError> {
    let mut keys = OPTIMIZER_KEYS.to_vec();
    keys.extend(["a-values", "phi1-modes", "tol"]);
    s.check_known(&keys)?;
    let base = lev_job(s)?;
    if base.opt.kind != OptimizerKind::Sgd {
        return Err(CliError::Config(format!("sweep varies the sgd maps, got opt={}", base.opt.kind)));
    }
    let a_values: Vec<f64> = s.list("a-values")?.unwrap_or_else(|| vec![0.0, 0.5]);
    let modes: Vec<Phi1Mode> =
        s.list("phi1-modes")?.unwrap_or_else(|| vec![Phi1Mode::ForwardEuler, Phi1Mode::Cayley, Phi1Mode::Expm]);
    if a_values.is_empty() || modes.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let tol: f64 = s.get_or("tol", 1e-6)?;
    let dir = out_path(s, "sweep")?;

    let mut cells = Vec::new();
    for &a in &a_values {
        let metric = MetricParams::new(a).map_err(invalid)?;
        for &mode in &modes {
            let mut job = base;
            job.opt.sgd = job.opt.sgd.with_metric(metric).with_modes(mode, base.opt.sgd.phi2_mode);
            job.opt.adam = job.opt.adam.with_metric(metric);
            cells.push((a, mode, job));
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = sweep_threads()? {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Numeric(e.to_string()))?;
    // cells share the seed and own their generators; order follows the grid
    let results: Vec<_> = pool.install(|| cells.par_iter().map(|(_, _, job)| lev_run(job)).collect());

    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    println!("{:>8} {:>8} {:>24} {:>12} {:>12} {:>12}", "a", "phi1", "final_objective", "gap", "iters_to_tol", "max_feas");
    let mut first_err = None;
    for ((a, mode, _), res) in cells.iter().zip(results) {
        let path = dir.join(format!("a{}_{mode}.csv", fmt_a(*a)));
        match res {
            Ok(o) => {
                write_trace(&path, &o.trace)?;
                let last = o.trace.last().expect("nonempty");
                let hit = o.trace.rows.iter().find(|r| o.gap(r.objective) <= tol).map(|r| r.iter.to_string());
                println!(
                    "{:>8} {:>8} {:>24.16e} {:>12.3e} {:>12} {:>12.3e}",
                    a,
                    mode.to_string(),
                    last.objective,
                    o.gap(last.objective),
                    hit.unwrap_or_else(|| "-".into()),
                    o.trace.max_structure().feas
                );
            }
            Err((partial, e)) => {
                if let Some(t) = partial {
                    write_trace(&path, &t)?;
                }
                println!("{:>8} {:>8} failed: {e}", a, mode.to_string());
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
