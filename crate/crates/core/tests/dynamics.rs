//! The continuous dynamics and the discrete maps read as its integrator.

use stiefel::dynamics::{
    energy, ode_check, phi2_exact, random_xyv, reference_integrate, reference_trajectory, split_field, xq_field,
    xyv_distance, xyv_field, Friction, OdeCheckConfig, OdeStateXQ, QuadraticObjective,
};
use stiefel::linalg::{Matrix, Rng};
use stiefel::MetricParams;

#[test]
fn exact_perpendicular_flow_matches_the_reference_integrator() {
    let mut rng = Rng::new(1);
    let s = random_xyv(10, 4, 0.8, &mut rng).unwrap();
    let g = rng.gaussian_matrix(10, 4);
    for a in [0.0, 0.5, -0.5] {
        let mp = MetricParams::new(a).unwrap();
        for gamma in [0.3, 1.0, 4.0] {
            let exact = phi2_exact(&s, &g, gamma, mp, 0.1).unwrap();
            let rk4 = reference_integrate(|q| split_field(2, q, &g, gamma, mp), &s, 0.1, 1e-4).unwrap();
            assert!(xyv_distance(&exact, &rk4) < 1e-10);
            let halves = phi2_exact(&phi2_exact(&s, &g, gamma, mp, 0.04).unwrap(), &g, gamma, mp, 0.06).unwrap();
            assert!(xyv_distance(&exact, &halves) < 1e-10);
        }
    }
}

#[test]
fn both_state_forms_trace_the_same_trajectory() {
    let mut rng = Rng::new(2);
    let obj = QuadraticObjective::random(8, &mut rng);
    let s0 = random_xyv(8, 3, 1.0, &mut rng).unwrap();
    let mp = MetricParams::canonical();
    let xyv = reference_integrate(|s| xyv_field(s, &obj.gradient(&s.x), 1.0, mp), &s0, 1.0, 1e-3).unwrap();
    let xq = reference_integrate(|s| xq_field(s, &obj.gradient(&s.x), 1.0, mp), &OdeStateXQ::from_xyv(&s0), 1.0, 1e-3)
        .unwrap();
    assert!((&xq.x - &xyv.x).frobenius_norm() < 1e-9);
    assert!((&xq.q - &OdeStateXQ::from_xyv(&xyv).q).frobenius_norm() < 1e-9);
}

#[test]
fn energy_dissipates_at_every_reference_step() {
    let mut rng = Rng::new(3);
    let obj = QuadraticObjective::random(12, &mut rng);
    let s0 = OdeStateXQ::from_xyv(&random_xyv(12, 4, 1.0, &mut rng).unwrap());
    for a in [0.0, 0.5] {
        let mp = MetricParams::new(a).unwrap();
        let mut prev = f64::INFINITY;
        let mut worst: f64 = 0.0;
        reference_trajectory(&mut |s: &OdeStateXQ| xq_field(s, &obj.gradient(&s.x), 0.7, mp), &s0, 3.0, 1e-3, |_, s| {
            let e = energy(s, obj.value(&s.x), mp);
            worst = worst.max(e - prev);
            prev = e;
        })
        .unwrap();
        assert!(worst <= 1e-8, "a = {a}: energy rose by {worst}");
    }
}

#[test]
fn default_self_check_passes() {
    let report = ode_check(&OdeCheckConfig::default()).unwrap();
    assert!(report.passes(1e-8), "{report:?}");
    assert!(report.xq_xyv_gap < 1e-8);
}

#[test]
fn zero_friction_is_rejected() {
    assert!(Friction::new(0.0).is_err());
    let cfg = OdeCheckConfig { gammas: vec![1.0, 0.0], ..OdeCheckConfig::default() };
    assert!(ode_check(&cfg).is_err());
}

#[test]
fn fields_vanish_at_a_critical_point_at_rest() {
    // X spanning eigenvectors of A is critical for −Tr(XᵀAX)
    let a = Matrix::from_diag(&[3.0, 2.0, 1.0, 0.5]);
    let obj = QuadraticObjective { a };
    let x = Matrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
    let s = stiefel::dynamics::OdeStateXYV { x: x.clone(), y: Matrix::zeros(2, 2), v: Matrix::zeros(4, 2) };
    let d = xyv_field(&s, &obj.gradient(&x), 1.0, MetricParams::canonical());
    assert!(d.x.max_abs() + d.y.max_abs() + d.v.max_abs() < 1e-15);
}
