//! Task-space dynamics of both robots against energy and projection oracles.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use parbot::dynamics::{check_skew_symmetry, evaluate_dynamics, forward_acceleration, ZeroCoriolis};
use parbot::linalg::min_symmetric_eigenvalue;
use parbot::robots::Rpr2Params;
use parbot::{RobotModel, TaskState};

fn legs(p: &Rpr2Params, x: &DVector<f64>) -> [(DVector<f64>, f64); 2] {
    let d1 = DVector::from_vec(vec![x[0], x[1]]);
    let d2 = DVector::from_vec(vec![x[0] - p.base_width, x[1]]);
    let (l1, l2) = (d1.norm(), d2.norm());
    [(d1 / l1, l1), (d2 / l2, l2)]
}

/// Kinetic energy from link velocities: the cylinder swings about its base
/// joint, the piston also slides along the leg.
fn kinetic_energy(p: &Rpr2Params, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut t = 0.5 * p.platform_mass * v.norm_squared();
    for (u, l) in legs(p, x) {
        let perp = DVector::from_vec(vec![-u[1], u[0]]);
        let omega = perp.dot(v) / l;
        let l_dot = u.dot(v);
        let cyl = &perp * (p.link_com * omega);
        let piston = &u * l_dot + &perp * ((l - p.link_com) * omega);
        t += 0.5 * p.link_mass * (cyl.norm_squared() + piston.norm_squared()) + 0.5 * p.link_inertia * omega * omega;
    }
    t
}

fn potential_energy(p: &Rpr2Params, x: &DVector<f64>) -> f64 {
    let mut height_mass = p.platform_mass * x[1];
    for (u, l) in legs(p, x) {
        height_mass += p.link_mass * p.link_com * u[1] + p.link_mass * (l - p.link_com) * u[1];
    }
    p.gravity * height_mass
}

/// 3x3 cross-product matrix of a planar vector, squared, restricted to the plane.
fn cross_squared(u: &DVector<f64>) -> DMatrix<f64> {
    let w = Vector3::new(u[0], u[1], 0.0);
    let k = Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0);
    let k2 = k * k;
    DMatrix::from_fn(2, 2, |i, j| k2[(i, j)])
}

/// Inertia in the projection form: axial platform-plus-piston mass and
/// swing inertia about each base joint, including the piston offset.
fn projection_inertia(p: &Rpr2Params, x: &DVector<f64>, piston_offset: bool) -> DMatrix<f64> {
    let (m, c) = (p.link_mass, p.link_com);
    let mut out = DMatrix::identity(2, 2) * p.platform_mass;
    for (u, l) in legs(p, x) {
        let piston_arm = if piston_offset { l - c } else { c };
        let swing = (p.link_inertia + m * c * c + m * piston_arm * piston_arm) / (l * l);
        out += &u * u.transpose() * m - cross_squared(&u) * swing;
    }
    out
}

#[test]
fn cdr_dynamics_are_constant() {
    let model = cdr4();
    let mut rng = rng(10);
    for _ in 0..100 {
        let s = state(&model, &mut rng);
        let d = evaluate_dynamics(&model, &s).unwrap();
        assert_eq!(d.m, DMatrix::identity(3, 3) * 4.5);
        assert_eq!(d.c, DMatrix::zeros(3, 3));
        assert!((d.g - DVector::from_vec(vec![0.0, 0.0, 4.5 * 9.81])).amax() < 1e-12);
        assert_eq!(check_skew_symmetry(&model, &s, 1e-6).unwrap(), 0.0);
    }
}

#[test]
fn cdr_free_fall() {
    let model = cdr4();
    let s = TaskState::at_rest(DVector::from_vec(vec![0.3, -0.2, 1.5]));
    let acc = forward_acceleration(&model, &s, &DVector::zeros(4)).unwrap();
    assert!((acc - DVector::from_vec(vec![0.0, 0.0, -9.81])).amax() < 1e-12);
}

#[test]
fn rpr_inertia_is_hessian_of_kinetic_energy() {
    let model = rpr2();
    let p = model.params().clone();
    let mut rng = rng(11);
    for _ in 0..200 {
        let x = model.workspace().sample_position(&mut rng);
        let m = model.inertia(&x).unwrap();
        let e = |i: usize| DVector::from_fn(2, |k, _| if k == i { 1.0 } else { 0.0 });
        for i in 0..2 {
            for j in 0..2 {
                let both = kinetic_energy(&p, &x, &(e(i) + e(j)));
                let want = both - kinetic_energy(&p, &x, &e(i)) - kinetic_energy(&p, &x, &e(j));
                let want = if i == j { 0.5 * both } else { want };
                assert!((m[(i, j)] - want).abs() < 1e-12 * m.amax(), "({i},{j}) {} vs {want}", m[(i, j)]);
            }
        }
    }
}

#[test]
fn rpr_inertia_matches_projection_form() {
    let model = rpr2();
    let p = model.params().clone();
    let x = DVector::from_vec(vec![0.3, 0.4]);
    let m = model.inertia(&x).unwrap();
    assert!(rel_m(&m, &projection_inertia(&p, &x, true)) < 1e-12);
    // Placing the piston mass at c from the base instead of l - c is a
    // different, wrong inertia at this configuration.
    assert!(rel_m(&m, &projection_inertia(&p, &x, false)) > 1e-2);
}

#[test]
fn rpr_gravity_is_gradient_of_potential() {
    let model = rpr2();
    let p = model.params().clone();
    let mut rng = rng(12);
    let h = 1e-6;
    for _ in 0..200 {
        let s = state(&model, &mut rng);
        let g = evaluate_dynamics(&model, &s).unwrap().g;
        let grad = DVector::from_fn(2, |i, _| {
            let mut d = DVector::zeros(2);
            d[i] = h;
            (potential_energy(&p, &(&s.x + &d)) - potential_energy(&p, &(&s.x - &d))) / (2.0 * h)
        });
        assert!((g - grad).amax() < 1e-7);
    }
    let mid = TaskState::at_rest(DVector::from_vec(vec![0.5 * p.base_width, 0.8]));
    assert_eq!(evaluate_dynamics(&model, &mid).unwrap().g[0], 0.0);
}

#[test]
fn rpr_coriolis_vanishes_at_rest() {
    let model = rpr2();
    let mut rng = rng(13);
    for _ in 0..50 {
        let s = TaskState::at_rest(model.workspace().sample_position(&mut rng));
        let c = evaluate_dynamics(&model, &s).unwrap().c;
        assert_eq!((c * &s.xdot).amax(), 0.0);
    }
}

#[test]
fn rpr_equations_of_motion_match_lagrangian() {
    // d/dt (M Xd) - dT/dX + dU/dX evaluated by finite differences equals M Xdd + C Xd + G.
    let model = rpr2();
    let p = model.params().clone();
    let mut rng = rng(14);
    let h = 1e-5;
    for _ in 0..100 {
        let s = state(&model, &mut rng);
        let acc = vector(&mut rng, 2, 3.0);
        let d = evaluate_dynamics(&model, &s).unwrap();
        let lhs = &d.m * &acc + &d.c * &s.xdot + &d.g;
        let momentum = |x: &DVector<f64>, v: &DVector<f64>| model.inertia(x).unwrap() * v;
        let (xp, xm) = (&s.x + &s.xdot * h, &s.x - &s.xdot * h);
        let (vp, vm) = (&s.xdot + &acc * h, &s.xdot - &acc * h);
        let dp = (momentum(&xp, &vp) - momentum(&xm, &vm)) / (2.0 * h);
        let partial = |f: &dyn Fn(&DVector<f64>) -> f64| {
            DVector::from_fn(2, |i, _| {
                let mut e = DVector::zeros(2);
                e[i] = h;
                (f(&(&s.x + &e)) - f(&(&s.x - &e))) / (2.0 * h)
            })
        };
        let dt_dx = partial(&|x| kinetic_energy(&p, x, &s.xdot));
        let du_dx = partial(&|x| potential_energy(&p, x));
        let rhs = dp - dt_dx + du_dx;
        assert!(rel(&lhs, &rhs) < 1e-6, "{lhs} vs {rhs}");
    }
}

#[test]
fn inertia_is_positive_definite_and_symmetric() {
    for model in [Box::new(rpr2()) as Box<dyn RobotModel>, Box::new(cdr4())] {
        let mut rng = rng(15);
        for _ in 0..1000 {
            let x = model.workspace().sample_position(&mut rng);
            let m = model.inertia(&x).unwrap();
            assert!(rel_m(&m, &m.transpose()) <= 1e-10);
            assert!(min_symmetric_eigenvalue(&m) > 0.0);
        }
    }
}

#[test]
fn skew_symmetry_and_negative_control() {
    let model = rpr2();
    let broken = ZeroCoriolis(rpr2());
    let mut rng = rng(16);
    let mut broken_worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = state(&model, &mut rng);
        assert!(check_skew_symmetry(&model, &s, 1e-6).unwrap() <= 1e-5);
        broken_worst = broken_worst.max(check_skew_symmetry(&broken, &s, 1e-6).unwrap());
    }
    assert!(broken_worst > 1e-2);
}

#[test]
fn force_balance_gives_zero_acceleration() {
    for model in [Box::new(rpr2()) as Box<dyn RobotModel>, Box::new(cdr4())] {
        let mut rng = rng(17);
        for _ in 0..100 {
            let s = state(model.as_ref(), &mut rng);
            let d = evaluate_dynamics(model.as_ref(), &s).unwrap();
            let jt = model.jacobian_transpose(&s.x).unwrap();
            let want = &d.c * &s.xdot + &d.g;
            let tau = jt.clone().pseudo_inverse(1e-14).unwrap() * &want;
            let acc = forward_acceleration(model.as_ref(), &s, &tau).unwrap();
            assert!(acc.amax() < 1e-9, "{}: {acc}", model.name());
        }
    }
}

#[test]
fn forward_acceleration_matches_dense_solve() {
    let model = rpr2();
    let mut rng = rng(18);
    for _ in 0..100 {
        let s = state(&model, &mut rng);
        let tau = vector(&mut rng, 2, 30.0);
        let d = evaluate_dynamics(&model, &s).unwrap();
        let rhs = model.jacobian_transpose(&s.x).unwrap() * &tau - &d.c * &s.xdot - &d.g;
        let want = d.m.clone().lu().solve(&rhs).unwrap();
        assert!(rel(&forward_acceleration(&model, &s, &tau).unwrap(), &want) < 1e-12);
    }
}

#[test]
fn cdr_closed_form_adjugate_matches_generic() {
    let model = cdr4();
    let mut rng = rng(19);
    for _ in 0..1000 {
        let x = model.workspace().sample_position(&mut rng);
        let (j, _) = model.jacobian_factors(&x).unwrap();
        let generic = parbot::regressor::adjugate_determinant(&j, true).r;
        assert!(rel_m(&model.adjugate_closed_form(&x), &generic) <= 1e-8);
    }
}

#[test]
fn configuration_checks_reject_folded_legs() {
    let model = rpr2();
    let origin = TaskState::at_rest(DVector::from_vec(vec![0.0, 0.0]));
    assert!(evaluate_dynamics(&model, &origin).is_err());
    let wrong_dim = TaskState::at_rest(DVector::from_vec(vec![0.3, 0.4, 0.5]));
    assert!(evaluate_dynamics(&model, &wrong_dim).is_err());
}
