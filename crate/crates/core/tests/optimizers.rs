//! Optimizer behaviour through the public driver API.

use stiefel::linalg::{orthogonal_init, Lu, Matrix, Rng};
use stiefel::optimizers::{
    adam_update, run, sgd_update, AdamHyper, AdamState, AnyOptimizer, NoisyOracle, Objective, OptimizerKind,
    Phi1Mode, Phi2Mode, SgdHyper, SgdState, StiefelOptimizer, Trace,
};
use stiefel::problems::{lev_generate, lev_value_grad, LevProblem};
use stiefel::{MetricParams, StiefelPoint};

fn setup(n: usize, m: usize, seed: u64) -> (LevProblem, StiefelPoint) {
    let mut rng = Rng::new(seed);
    let p = lev_generate(n, m, &mut rng).unwrap();
    (p, StiefelPoint::new(orthogonal_init(n, m, &mut rng).unwrap()).unwrap())
}

#[test]
fn every_mode_and_metric_converges_on_lev() {
    let (p, x0) = setup(40, 4, 1);
    let top = p.top_eigen_sum();
    for a in [0.0, 0.5] {
        for phi1 in [Phi1Mode::ForwardEuler, Phi1Mode::Cayley, Phi1Mode::Expm] {
            for phi2 in [Phi2Mode::ForwardEuler, Phi2Mode::Cayley, Phi2Mode::Exact] {
                let h = SgdHyper::new(0.1, 0.9).unwrap().with_metric(MetricParams::new(a).unwrap()).with_modes(phi1, phi2);
                let mut s = SgdState::new(x0.clone());
                for _ in 0..1500 {
                    s = sgd_update(&s, &lev_value_grad(&p, &s.x).unwrap().1, &h).unwrap();
                }
                let gap = p.gap(&s.x, top);
                assert!(gap < 1e-8, "a={a} {phi1:?}/{phi2:?}: gap {gap}");
            }
        }
    }
}

#[test]
fn adam_converges_on_lev() {
    let (p, x0) = setup(40, 4, 2);
    let top = p.top_eigen_sum();
    let h = AdamHyper { eta: 1e-2, ..AdamHyper::default() };
    let mut s = AdamState::new(x0);
    for _ in 0..3000 {
        s = adam_update(&s, &lev_value_grad(&p, &s.x).unwrap().1, &h).unwrap();
    }
    assert!(p.gap(&s.x, top) < 1e-4, "gap {}", p.gap(&s.x, top));
}

#[test]
fn snapshot_resume_continues_bit_for_bit() {
    let (p, x0) = setup(20, 3, 3);
    let h = SgdHyper::new(0.1, 0.9).unwrap();
    let mut s = SgdState::new(x0.clone());
    for _ in 0..50 {
        s = sgd_update(&s, &lev_value_grad(&p, &s.x).unwrap().1, &h).unwrap();
    }
    let mut resumed = SgdState::from_snapshot(&s.to_snapshot()).unwrap();
    assert_eq!(resumed.step, 50);
    for _ in 0..50 {
        s = sgd_update(&s, &lev_value_grad(&p, &s.x).unwrap().1, &h).unwrap();
        resumed = sgd_update(&resumed, &lev_value_grad(&p, &resumed.x).unwrap().1, &h).unwrap();
    }
    assert_eq!(s.x, resumed.x);
    assert_eq!(s.u, resumed.u);

    let ha = AdamHyper::default();
    let mut a = AdamState::new(x0);
    for _ in 0..20 {
        a = adam_update(&a, &lev_value_grad(&p, &a.x).unwrap().1, &ha).unwrap();
    }
    let b = AdamState::from_snapshot(&a.to_snapshot()).unwrap();
    assert_eq!((a.x, a.p, a.q, a.step), (b.x, b.p, b.q, b.step));
}

fn noisy_trace(kind: OptimizerKind, seed: u64) -> Trace {
    // the SO(n) methods need a square starting point
    let m = if matches!(kind, OptimizerKind::SonSgd | OptimizerKind::SonAdam) { 16 } else { 3 };
    let (p, x0) = setup(16, m, 4);
    let mut opt =
        AnyOptimizer::new(kind, x0, SgdHyper::new(0.05, 0.9).unwrap(), AdamHyper::default()).unwrap();
    let inner = Objective(move |x: &Matrix| lev_value_grad(&p, x).unwrap());
    let mut oracle = NoisyOracle { inner, sigma: 0.1, rng: Rng::new(seed) };
    run(&mut opt, &mut oracle, 200, 7).unwrap()
}

#[test]
fn same_seed_gives_identical_traces_apart_from_wall_time() {
    for kind in [OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::SonSgd, OptimizerKind::SonAdam, OptimizerKind::CayleyGd] {
        let strip = |t: Trace| t.rows.into_iter().map(|r| (r.iter, r.objective.to_bits(), r.feas.to_bits(), r.perp.to_bits())).collect::<Vec<_>>();
        assert_eq!(strip(noisy_trace(kind, 9)), strip(noisy_trace(kind, 9)), "{}", kind.name());
        assert_ne!(strip(noisy_trace(kind, 9)), strip(noisy_trace(kind, 10)), "{}", kind.name());
    }
}

#[test]
fn trace_csv_survives_a_file_round_trip() {
    let trace = noisy_trace(OptimizerKind::Sgd, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    trace.write_csv(&mut std::fs::File::create(&path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("iter,objective,feas,skew,perp,wall_ns\n"));
    let back = Trace::read_csv(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back, trace);
}

#[test]
fn son_iterates_stay_in_the_starting_component() {
    let mut rng = Rng::new(5);
    let mut x0 = orthogonal_init(6, 6, &mut rng).unwrap();
    if Lu::factor(&x0).unwrap().determinant() > 0.0 {
        for i in 0..6 {
            x0[(i, 0)] = -x0[(i, 0)];
        }
    }
    let d = rng.gaussian_matrix(6, 6);
    let mut opt = AnyOptimizer::new(
        OptimizerKind::SonSgd,
        StiefelPoint::new(x0).unwrap(),
        SgdHyper::new(0.1, 0.9).unwrap(),
        AdamHyper::default(),
    )
    .unwrap();
    let mut oracle = move |x: &Matrix| x - &d;
    for _ in 0..300 {
        opt.step(&mut oracle).unwrap();
        assert!(opt.structure().feas < 1e-12);
        assert!(Lu::factor(opt.point()).unwrap().determinant() < 0.0);
    }
}
