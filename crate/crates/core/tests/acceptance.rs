//! Acceptance suite. Each criterion prints exactly one `PASS` or `FAIL` line;
//! the process exits nonzero if any criterion fails.
//!
//! Run with `cargo test -p stiefel-core --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use stiefel::dynamics::{
    estimate_order, ode_check, random_xyv, reference_integrate, sgd_as_integrator, xyv_distance, xyv_field,
    OdeCheckConfig, QuadraticObjective,
};
use stiefel::linalg::{inv_sqrt_newton_schulz, orthogonal_init, Matrix, Rng};
use stiefel::optimizers::{
    adam_update, momentumless_cayley_step, sgd_update, son_adam_update, son_sgd_update, AdamHyper, AdamState,
    Geometry, JointOracle, MixedHyper, MixedOptimizer, SgdHyper, SgdState, SonState,
};
use stiefel::problems::{
    finite_diff_grad, lev_generate, lev_value_grad, prw_solve, prw_value_grad, random_search, relative_error,
    sinkhorn, two_gaussians, Linear, LevProblem, Procrustes, PrwConfig, Quadratic, SinkhornConfig,
};
use stiefel::{MetricParams, StiefelPoint};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn point(n: usize, m: usize, rng: &mut Rng) -> StiefelPoint {
    StiefelPoint::new(orthogonal_init(n, m, rng).unwrap()).unwrap()
}

fn structure_lev_n100() -> Outcome {
    let mut rng = Rng::new(1);
    let p = lev_generate(100, 10, &mut rng).unwrap();
    let x0 = point(100, 10, &mut rng);

    let h = SgdHyper::new(0.1, 0.9).unwrap();
    let mut s = SgdState::new(x0.clone());
    let mut sgd = s.structure();
    for _ in 0..5000 {
        let (_, g) = lev_value_grad(&p, &s.x).unwrap();
        s = sgd_update(&s, &g, &h).unwrap();
        sgd = sgd.max_with(s.structure());
    }

    let h = AdamHyper::new(1e-3, 0.9, 0.999, 1e-8).unwrap();
    let mut s = AdamState::new(x0);
    let mut adam = s.structure();
    for _ in 0..5000 {
        let (_, g) = lev_value_grad(&p, &s.x).unwrap();
        s = adam_update(&s, &g, &h).unwrap();
        adam = adam.max_with(s.structure());
    }

    let w = sgd.max_with(adam);
    check(
        w.feas <= 1e-10 && w.skew <= 1e-12 && w.perp <= 1e-10,
        format!(
            "sgd max (feas {:.1e}, skew {:.1e}, perp {:.1e}); adam max (feas {:.1e}, skew {:.1e}, perp {:.1e})",
            sgd.feas, sgd.skew, sgd.perp, adam.feas, adam.skew, adam.perp
        ),
    )
}

fn newton_schulz_eight_iterations() -> Outcome {
    let mut rng = Rng::new(2);
    let mut worst_iters = 0;
    let mut worst_res: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..100 {
        let s = rng.gaussian_matrix(10, 10).sym_part();
        let s = s.scale(1.0 / s.frobenius_norm());
        let a = &Matrix::identity(10) + &s.scale(0.1);
        let r = inv_sqrt_newton_schulz(&a, 1e-14, 8).map_err(|e| e.to_string())?;
        worst_iters = worst_iters.max(r.iters);
        worst_res = worst_res.max(*r.residuals.last().unwrap());
        // e_{k+1} ≤ C e_k² while the error is above the rounding floor
        for w in r.residuals.windows(2) {
            if w[1] > 1e-13 {
                worst_ratio = worst_ratio.max(w[1] / (w[0] * w[0]));
            }
        }
    }
    check(
        worst_iters <= 8 && worst_res <= 1e-14 && worst_ratio <= 10.0,
        format!("max iters {worst_iters}, max residual {worst_res:.1e}, max e_(k+1)/e_k^2 {worst_ratio:.2}"),
    )
}

fn first_order_integrator() -> Outcome {
    let mut rng = Rng::new(3);
    let obj = QuadraticObjective::random(20, &mut rng);
    let s0 = random_xyv(20, 5, 1.0, &mut rng).unwrap();
    let mp = MetricParams::canonical();
    let gamma = 1.0;
    let t_end = 1.0;
    let reference =
        reference_integrate(|s| xyv_field(s, &obj.gradient(&s.x), gamma, mp), &s0, t_end, 1e-4).unwrap();
    let template = SgdHyper::new(0.1, 0.5).unwrap().with_metric(mp);
    let (order, errs) = estimate_order(
        |s, h| sgd_as_integrator(s, &obj.gradient(&s.x), gamma, h, &template),
        &reference,
        &s0,
        t_end,
        &[1e-2, 5e-3, 2.5e-3],
        xyv_distance,
    )
    .map_err(|e| e.to_string())?;
    check(
        (0.8..=1.2).contains(&order),
        format!("order {order:.3} from errors {:.2e} {:.2e} {:.2e}", errs[0], errs[1], errs[2]),
    )
}

fn continuous_invariants() -> Outcome {
    let cfg = OdeCheckConfig { gammas: vec![0.5, 1.0, 5.0], t_end: 5.0, ..OdeCheckConfig::default() };
    let r = ode_check(&cfg).map_err(|e| e.to_string())?;
    check(
        r.max_drift <= 1e-8 && r.max_energy_increase <= 1e-8,
        format!(
            "gammas {:?}, T {}: drift {:.1e}, energy rise {:.1e}",
            cfg.gammas, cfg.t_end, r.max_drift, r.max_energy_increase
        ),
    )
}

/// First iteration at which `gap ≤ target`, or `None` within `budget`.
fn iterations_to_gap(p: &LevProblem, x0: &StiefelPoint, top: f64, target: f64, budget: usize, sgd: bool) -> Option<usize> {
    let h = SgdHyper::new(0.1, 0.9).unwrap();
    let mut s = SgdState::new(x0.clone());
    let mut x = x0.matrix().clone();
    for it in 0..=budget {
        let cur = if sgd { &s.x } else { &x };
        let (f, g) = lev_value_grad(p, cur).unwrap();
        if top + f <= target {
            return Some(it);
        }
        if sgd {
            s = sgd_update(&s, &g, &h).unwrap();
        } else {
            x = momentumless_cayley_step(&x, &g, h.eta).unwrap();
        }
    }
    None
}

fn lev_optimality() -> Outcome {
    let mut rng = Rng::new(5);
    let p = lev_generate(500, 5, &mut rng).unwrap();
    let top = p.top_eigen_sum();
    let x0 = point(500, 5, &mut rng);
    let Some(reached) = iterations_to_gap(&p, &x0, top, 1e-6, 3000, true) else {
        return Err("sgd did not reach gap 1e-6 within 3000 iterations".into());
    };

    let mut races = Vec::new();
    for seed in 10..15 {
        let mut rng = Rng::new(seed);
        let p = lev_generate(500, 5, &mut rng).unwrap();
        let top = p.top_eigen_sum();
        let x0 = point(500, 5, &mut rng);
        let sgd = iterations_to_gap(&p, &x0, top, 1e-4, 20_000, true);
        let cayley = iterations_to_gap(&p, &x0, top, 1e-4, 20_000, false);
        races.push((sgd, cayley));
    }
    let wins = races.iter().all(|(s, c)| match (s, c) {
        (Some(s), Some(c)) => s < c,
        (Some(_), None) => true,
        _ => false,
    });
    check(wins, format!("gap 1e-6 at iteration {reached}; (sgd, cayley) iterations to 1e-4: {races:?}"))
}

fn complexity_scaling() -> Outcome {
    let ns = [250usize, 500, 1000, 2000];
    let mut times = Vec::new();
    for &n in &ns {
        let mut rng = Rng::new(6);
        let x0 = point(n, 10, &mut rng);
        let g = rng.gaussian_matrix(n, 10);
        let h = SgdHyper::new(1e-3, 0.9).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..7 {
            let mut s = SgdState::new(x0.clone());
            let t0 = Instant::now();
            for _ in 0..100 {
                s = sgd_update(&s, &g, &h).unwrap();
            }
            best = best.min(t0.elapsed().as_secs_f64() / 100.0);
        }
        times.push(best);
    }
    let ln_n: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ln_t: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let mx = ln_n.iter().sum::<f64>() / 4.0;
    let my = ln_t.iter().sum::<f64>() / 4.0;
    let sxy: f64 = ln_n.iter().zip(&ln_t).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = ln_n.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let per_iter: Vec<String> = times.iter().map(|t| format!("{:.0}us", t * 1e6)).collect();
    check((0.8..=1.2).contains(&slope), format!("slope {slope:.3} over n {ns:?}, per-iteration {per_iter:?}"))
}

fn prw_desk_scale() -> Outcome {
    let mut rng = Rng::new(7);
    let p = two_gaussians(200, 10, 1.0, &mut rng).unwrap();
    let u0 = point(10, 2, &mut rng);
    let cfg = PrwConfig::default();
    let r = prw_solve(&p, u0, &cfg).map_err(|e| e.to_string())?;
    let best = random_search(&p, 1000, cfg.sinkhorn, &mut Rng::new(8)).map_err(|e| e.to_string())?;
    let worst_res = r.residuals.iter().copied().fold(0.0, f64::max);
    check(
        r.value >= 0.95 * best && worst_res <= 1e-6,
        format!(
            "value {:.4}, best of 1000 random {:.4} (ratio {:.3}), max marginal residual {worst_res:.1e}",
            r.value,
            best,
            r.value / best
        ),
    )
}

fn gradient_correctness() -> Outcome {
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-5;
    let mut rng = Rng::new(9);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, err: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(entry) => entry.1 = entry.1.max(err),
        None => worst.push((name, err)),
    };

    let lev = lev_generate(12, 3, &mut rng).unwrap();
    let a = rng.gaussian_matrix(9, 9).sym_part();
    let quad = Quadratic::new(a, rng.gaussian_matrix(9, 4)).unwrap();
    let procrustes = Procrustes { d: rng.gaussian_matrix(7, 3) };
    let linear = Linear { d: rng.gaussian_matrix(6, 2) };
    let prw = two_gaussians(25, 6, 1.0, &mut rng).unwrap();

    for _ in 0..20 {
        let x = rng.gaussian_matrix(12, 3);
        let g = lev_value_grad(&lev, &x).unwrap().1;
        let fd = finite_diff_grad(|x| lev_value_grad(&lev, x).unwrap().0, &x, H);
        record("lev", relative_error(&fd, &g, 1e-12));

        let x = rng.gaussian_matrix(9, 4);
        record("quadratic", relative_error(&finite_diff_grad(|x| quad.value(x), &x, H), &quad.gradient(&x), 1e-12));

        let x = rng.gaussian_matrix(7, 3);
        record(
            "procrustes",
            relative_error(&finite_diff_grad(|x| procrustes.value(x), &x, H), &procrustes.gradient(&x), 1e-12),
        );

        let x = rng.gaussian_matrix(6, 2);
        record("linear", relative_error(&finite_diff_grad(|x| linear.value(x), &x, H), &linear.gradient(&x), 1e-12));

        // the plan is held fixed during the projection step
        let u = orthogonal_init(6, 2, &mut rng).unwrap();
        let cost = stiefel::problems::prw_cost(&prw, &u);
        let plan = sinkhorn(&cost, &prw.r, &prw.c, prw.reg, SinkhornConfig::default()).map_err(|e| e.to_string())?;
        let g = prw_value_grad(&prw, &u, &plan).unwrap().1;
        let fd = finite_diff_grad(|u| prw_value_grad(&prw, u, &plan).unwrap().0, &u, H);
        record("prw", relative_error(&fd, &g, 1e-12));
    }
    let ok = worst.iter().all(|(_, e)| *e <= TOL);
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    check(ok, format!("max relative error over 20 points: {}", detail.join(", ")))
}

fn square_case_coherence() -> Outcome {
    let mut rng = Rng::new(10);
    let mut d = rng.gaussian_matrix(4, 4);
    // keep the optimum in the identity component, where SO(n) iterates live
    if stiefel::linalg::Lu::factor(&d).unwrap().determinant() < 0.0 {
        for i in 0..4 {
            d[(i, 0)] = -d[(i, 0)];
        }
    }
    let toy = Procrustes { d };
    let target = toy.optimum().unwrap();
    let x0 = Matrix::identity(4);

    let h = SgdHyper::new(0.05, 0.9).unwrap();
    let mut s = SgdState::new(StiefelPoint::new(x0.clone()).unwrap());
    let mut u_max: f64 = 0.0;
    for _ in 0..1000 {
        s = sgd_update(&s, &toy.gradient(&s.x), &h).unwrap();
        u_max = u_max.max(s.u.max_abs());
    }

    let mut s = SonState::new(x0.clone()).unwrap();
    let mut feas_sgd: f64 = 0.0;
    for _ in 0..2000 {
        s = son_sgd_update(&s, &toy.gradient(&s.x), &h).unwrap();
        feas_sgd = feas_sgd.max(stiefel::manifold::feasibility(&s.x));
    }
    let err_sgd = (&s.x - &target).frobenius_norm();

    let ha = AdamHyper::new(1e-2, 0.9, 0.999, 1e-8).unwrap();
    let mut s = SonState::new(x0).unwrap();
    let mut feas_adam: f64 = 0.0;
    for _ in 0..5000 {
        s = son_adam_update(&s, &toy.gradient(&s.x), &ha).unwrap();
        feas_adam = feas_adam.max(stiefel::manifold::feasibility(&s.x));
    }
    let err_adam = (&s.x - &target).frobenius_norm();

    check(
        u_max == 0.0 && feas_sgd <= 1e-12 && feas_adam <= 1e-12 && err_sgd <= 1e-6 && err_adam <= 1e-6,
        format!(
            "max |U| {u_max:e}; son-sgd feas {feas_sgd:.1e}, error {err_sgd:.1e}; son-adam feas {feas_adam:.1e}, error {err_adam:.1e}"
        ),
    )
}

struct TwoBlock {
    lev: LevProblem,
    c: Matrix,
}

impl JointOracle for TwoBlock {
    fn gradients(&mut self, p: &[&Matrix]) -> Vec<Matrix> {
        vec![lev_value_grad(&self.lev, p[0]).unwrap().1, (p[1] - &self.c).scale(2.0)]
    }
}

fn mixed_groups() -> Outcome {
    let mut rng = Rng::new(11);
    let lev = lev_generate(10, 2, &mut rng).unwrap();
    let top = lev.top_eigen_sum();
    let c = rng.gaussian_matrix(3, 4);
    let x0 = orthogonal_init(10, 2, &mut rng).unwrap();
    let mut opt = MixedOptimizer::new(
        vec![(Geometry::Stiefel, x0), (Geometry::Euclidean, Matrix::zeros(3, 4))],
        MixedHyper::momentum(SgdHyper::new(0.05, 0.9).unwrap()),
    )
    .map_err(|e| e.to_string())?;
    let mut toy = TwoBlock { lev, c };
    for _ in 0..3000 {
        opt.step(&mut toy).map_err(|e| e.to_string())?;
    }
    let params = opt.params();
    let gap = toy.lev.gap(params[0], top);
    let werr = (params[1] - &toy.c).frobenius_norm();
    check(gap <= 1e-6 && werr <= 1e-6, format!("stiefel block gap {gap:.1e}, euclidean block error {werr:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("structure preservation, LEV n=100 m=10, 5000 iterations", structure_lev_n100),
        ("Newton-Schulz within 8 iterations", newton_schulz_eight_iterations),
        ("first-order composed SGD integrator", first_order_integrator),
        ("continuous-dynamics drift and energy", continuous_invariants),
        ("LEV optimality and speed against Cayley GD", lev_optimality),
        ("O(n) per-iteration cost at fixed m", complexity_scaling),
        ("PRW against random projections", prw_desk_scale),
        ("analytic gradients against finite differences", gradient_correctness),
        ("square case and SO(n) coherence", square_case_coherence),
        ("mixed parameter groups", mixed_groups),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
