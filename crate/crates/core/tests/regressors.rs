//! Factorization identities of every regressor block on both robots.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use parbot::dynamics::evaluate_dynamics;
use parbot::regressor::{
    adjugate_determinant, assemble_yf, factorize_jacobian, kinematic_regressor, theta_eta, theta_mu,
    YfParts,
};
use parbot::{RobotModel, TaskState};

const DRAWS: usize = 1000;

fn models() -> Vec<Box<dyn RobotModel>> {
    vec![Box::new(rpr2()), Box::new(cdr4())]
}

fn rhs(model: &dyn RobotModel, s: &TaskState, v: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
    let d = evaluate_dynamics(model, s).unwrap();
    &d.m * a + &d.c * v + &d.g
}

#[test]
fn dynamics_regressor_reproduces_inverse_dynamics() {
    for model in models() {
        let mut rng = rng(1);
        let theta_c = model.parameters().theta_c;
        let mut worst: f64 = 0.0;
        for _ in 0..DRAWS {
            let s = state(model.as_ref(), &mut rng);
            let n = s.dim();
            let (v, a) = (vector(&mut rng, n, 2.0), vector(&mut rng, n, 5.0));
            let y = model.dynamics_regressor(&s, &v, &a).unwrap();
            worst = worst.max(rel(&(y * &theta_c), &rhs(model.as_ref(), &s, &v, &a)));
        }
        assert!(worst <= 1e-9, "{}: {worst:e}", model.name());
    }
}

#[test]
fn statics_reduce_to_gravity() {
    for model in models() {
        let mut rng = rng(2);
        let s = state(model.as_ref(), &mut rng);
        let zero = DVector::zeros(s.dim());
        let y = model.dynamics_regressor(&s, &zero, &zero).unwrap();
        let g = evaluate_dynamics(model.as_ref(), &s).unwrap().g;
        assert!(rel(&(y * model.parameters().theta_c), &g) < 1e-12);
    }
}

#[test]
fn factorization_reproduces_jacobian() {
    for model in models() {
        let mut rng = rng(3);
        for _ in 0..DRAWS {
            let s = state(model.as_ref(), &mut rng);
            let jf = factorize_jacobian(model.as_ref(), &s).unwrap();
            let jt = model.jacobian_transpose(&s.x).unwrap();
            assert!(rel_m(&jf.jacobian_transpose(), &jt) <= 1e-12);
            let kin = kinematic_regressor(model.as_ref(), &s).unwrap();
            assert!(rel_m(&kin.j_new_t(), &jf.j_new_t) <= 1e-12);
        }
    }
}

#[test]
fn cramer_and_pseudo_inverse() {
    for model in models() {
        let redundant = model.dims().redundant();
        let mut rng = rng(4);
        for _ in 0..DRAWS {
            let s = state(model.as_ref(), &mut rng);
            let j = factorize_jacobian(model.as_ref(), &s).unwrap().j_new_t;
            let split = adjugate_determinant(&j, redundant);
            let n = j.nrows();
            let t_eye = DMatrix::identity(n, n) * split.t;
            if redundant {
                let gram = &j * j.transpose();
                assert!(rel_m(&(&gram * parbot::linalg::adjugate(&gram)), &t_eye) <= 1e-10);
                assert!(rel_m(&(&j * &split.r), &t_eye) <= 1e-10);
            } else {
                assert!(rel_m(&(&split.r * &j), &t_eye) <= 1e-10);
            }
            if split.t.abs() > 1e-6 {
                let pinv = j.clone().pseudo_inverse(1e-13).unwrap();
                let ours = split.pseudo_inverse().unwrap();
                assert!(rel_m(&ours, &pinv) <= 1e-9, "{}", model.name());
            }
        }
    }
}

#[test]
fn determinant_regressor_matches_cofactor_determinant() {
    for model in models() {
        let redundant = model.dims().redundant();
        let theta_b = model.parameters().theta_b;
        let mut rng = rng(5);
        for _ in 0..DRAWS {
            let s = state(model.as_ref(), &mut rng);
            let j = factorize_jacobian(model.as_ref(), &s).unwrap().j_new_t;
            let t = adjugate_determinant(&j, redundant).t;
            let yb = model.determinant_regressor(&s.x).unwrap();
            let got = (yb * &theta_b)[0];
            assert!((got - t).abs() <= 1e-8 * t.abs().max(1e-12), "{}: {got} vs {t}", model.name());
        }
    }
}

#[test]
fn adjugate_regressor_matches_composition() {
    for model in models() {
        let redundant = model.dims().redundant();
        let theta_a = model.parameters().theta_a;
        let mut rng = rng(6);
        let mut worst: f64 = 0.0;
        for _ in 0..DRAWS {
            let s = state(model.as_ref(), &mut rng);
            let n = s.dim();
            let (v, a, ks) = (vector(&mut rng, n, 2.0), vector(&mut rng, n, 5.0), vector(&mut rng, n, 3.0));
            let j = factorize_jacobian(model.as_ref(), &s).unwrap().j_new_t;
            let r = adjugate_determinant(&j, redundant).r;
            let want = r * (rhs(model.as_ref(), &s, &v, &a) - &ks);
            let ya = model.adjugate_regressor(&s, &v, &a, &ks).unwrap();
            worst = worst.max(rel(&(ya * &theta_a), &want));
        }
        assert!(worst <= 1e-8, "{}: {worst:e}", model.name());
    }
}

#[test]
fn closed_loop_regressor_matches_error_dynamics() {
    // With estimates (Theta^, theta^_a, theta^_b, theta^_c) the applied force is
    // F = J_new^T Y_a theta^_a / T^ and M S' + C S + K S = F - (Y_c theta_c - KS).
    for model in models() {
        let truth = model.parameters();
        let mut rng = rng(7);
        let mut worst: f64 = 0.0;
        for _ in 0..DRAWS {
            let s = state(model.as_ref(), &mut rng);
            let n = s.dim();
            let (v, a, ks) = (vector(&mut rng, n, 2.0), vector(&mut rng, n, 5.0), vector(&mut rng, n, 3.0));
            let perturb = |x: &DVector<f64>, rng: &mut rand_chacha::ChaCha8Rng| {
                x.component_mul(&DVector::from_fn(x.len(), |_, _| 1.0 + rand::Rng::random_range(rng, -0.1..0.1)))
            };
            let a_hat = perturb(&truth.theta_a, &mut rng);
            let b_hat = perturb(&truth.theta_b, &mut rng);
            let c_hat = perturb(&truth.theta_c, &mut rng);
            let kin_hat = truth.theta_kin.map(|v| v * (1.0 + rand::Rng::random_range(&mut rng, -0.1..0.1)));

            let kin = model.kinematic_regressor(&s.x).unwrap();
            let y_a = model.adjugate_regressor(&s, &v, &a, &ks).unwrap();
            let y_b = model.determinant_regressor(&s.x).unwrap();
            let y_c = model.dynamics_regressor(&s, &v, &a).unwrap();
            let t_hat = (&y_b * &b_hat)[0];
            let f = kin.j_new_t() * (&y_a * &a_hat) / t_hat;
            let lhs = f - (&y_c * &truth.theta_c - &ks);

            let parts = YfParts { kin: &kin, y_a: &y_a, y_b: &y_b, y_c: &y_c, ks: &ks };
            let (y_f, _, _) = assemble_yf(&parts, &kin_hat, &c_hat, &b_hat).unwrap();
            let a_err = &a_hat - &truth.theta_a;
            let b_err = &b_hat - &truth.theta_b;
            let tilde: Vec<f64> = a_err
                .iter()
                .chain(theta_eta(&(&kin_hat - &truth.theta_kin), &a_err).iter())
                .chain(theta_mu(&(&c_hat - &truth.theta_c), &b_err).iter())
                .chain(b_err.iter())
                .copied()
                .collect();
            let rhs = y_f * DVector::from_vec(tilde);
            worst = worst.max(rel(&rhs, &lhs));
        }
        assert!(worst <= 1e-8, "{}: {worst:e}", model.name());
    }
}

#[test]
fn closed_loop_regressor_vanishes_with_exact_estimates() {
    for model in models() {
        let truth = model.parameters();
        let mut rng = rng(8);
        let s = state(model.as_ref(), &mut rng);
        let n = s.dim();
        let (v, a, ks) = (vector(&mut rng, n, 2.0), vector(&mut rng, n, 5.0), vector(&mut rng, n, 3.0));
        let kin = model.kinematic_regressor(&s.x).unwrap();
        let y_a = model.adjugate_regressor(&s, &v, &a, &ks).unwrap();
        let y_b = model.determinant_regressor(&s.x).unwrap();
        let y_c = model.dynamics_regressor(&s, &v, &a).unwrap();
        let t = (&y_b * &truth.theta_b)[0];
        let f = kin.j_new_t() * (&y_a * &truth.theta_a) / t;
        let lhs = f - (&y_c * &truth.theta_c - &ks);
        assert!(lhs.amax() <= 1e-9 * (&y_c * &truth.theta_c).amax());
    }
}

#[test]
fn dimensions_are_declared() {
    let r = rpr2().dims();
    assert_eq!((r.n, r.m, r.l, r.r, r.k, r.p, r.q()), (2, 2, 1, 24, 1, 17, 90));
    let c = cdr4().dims();
    assert_eq!((c.n, c.m, c.l, c.r, c.k, c.p, c.q()), (3, 4, 3, 16, 3, 1, 214));
}
