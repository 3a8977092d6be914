//! Sampled property suites: algebraic identities of the regressor blocks and
//! structural properties of the dynamics, over random workspace states.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{check_skew_symmetry, evaluate_dynamics, RobotModel, TaskState, ZeroCoriolis};
use crate::linalg::{min_symmetric_eigenvalue, rel_residual, rel_residual_vec};
use crate::regressor::{
    adjugate_determinant, assemble_yeta, assemble_yf, assemble_ymu, factorize_jacobian, theta_eta, theta_mu,
    YfParts,
};
use crate::robots::{Cdr4, Cdr4Params, Rpr2, Rpr2Params};
use crate::Result;

/// Floor on reference norms in relative residuals.
const FLOOR: f64 = 1e-12;

/// Step of the central difference used for `dM/dt`.
pub const SKEW_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// Pass when the worst value is at most the threshold.
    AtMost,
    /// Pass when the worst value is strictly above the threshold.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub robot: String,
    pub property: String,
    pub worst: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub samples: usize,
    pub passed: bool,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::Above => ">",
        };
        write!(
            f,
            "{} {:<6} {:<28} worst {:>11.3e} {op} {:.1e}  (n={})",
            if self.passed { "PASS" } else { "FAIL" },
            self.robot,
            self.property,
            self.worst,
            self.threshold,
            self.samples
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Report {
    pub results: Vec<PropertyResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, robot: &str, property: &str) -> Option<&PropertyResult> {
        self.results.iter().find(|r| r.robot == robot && r.property == property)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        let failed = self.results.iter().filter(|r| !r.passed).count();
        write!(f, "{} properties, {failed} failed", self.results.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidateOptions {
    pub samples: usize,
    pub seed: u64,
    /// Replace each model's Coriolis matrix by zero (negative control).
    pub zero_coriolis: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { samples: 1000, seed: 0, zero_coriolis: false }
    }
}

struct Tracker {
    robot: String,
    samples: usize,
    results: Vec<PropertyResult>,
}

impl Tracker {
    fn push(&mut self, property: &str, worst: f64, threshold: f64, comparison: Comparison) {
        let passed = match comparison {
            Comparison::AtMost => worst <= threshold,
            Comparison::Above => worst > threshold,
        };
        self.results.push(PropertyResult {
            robot: self.robot.clone(),
            property: property.into(),
            worst,
            threshold,
            comparison,
            samples: self.samples,
            passed,
        });
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

fn scaled(rng: &mut ChaCha8Rng, v: &DVector<f64>, pct: f64) -> DVector<f64> {
    v.map(|x| x * (1.0 + rng.random_range(-pct..pct)))
}

/// Worst values over the samples, one slot per property.
#[derive(Default)]
struct Worst {
    factor: f64,
    kin: f64,
    cramer: f64,
    pinv: f64,
    pinv_count: usize,
    yc: f64,
    ya: f64,
    yb: f64,
    yeta: f64,
    ymu: f64,
    yf: f64,
    sym: f64,
    min_eig: f64,
    skew: f64,
}

fn sample_once(model: &dyn RobotModel, rng: &mut ChaCha8Rng, w: &mut Worst) -> Result<()> {
    let dims = model.dims();
    let truth = model.parameters();
    let x = model.workspace().sample_position(rng);
    let s = TaskState::new(x, uniform(rng, dims.n, 1.0));
    let v = uniform(rng, dims.n, 2.0);
    let a = uniform(rng, dims.n, 5.0);
    let ks = uniform(rng, dims.n, 3.0);

    let jf = factorize_jacobian(model, &s)?;
    let jt = model.jacobian_transpose(&s.x)?;
    w.factor = w.factor.max(rel_residual(&jf.jacobian_transpose(), &jt, FLOOR));
    let kin = model.kinematic_regressor(&s.x)?;
    w.kin = w.kin.max(rel_residual(&kin.j_new_t(), &jf.j_new_t, FLOOR));

    let split = adjugate_determinant(&jf.j_new_t, dims.redundant());
    let eye_t = DMatrix::identity(dims.n, dims.n) * split.t;
    let cramer = if dims.redundant() {
        let gram = &jf.j_new_t * jf.j_new_t.transpose();
        rel_residual(&(&gram * crate::linalg::adjugate(&gram)), &eye_t, FLOOR)
    } else {
        rel_residual(&(&split.r * &jf.j_new_t), &eye_t, FLOOR)
    };
    w.cramer = w.cramer.max(cramer);
    if split.t.abs() > crate::EPS_DET {
        if let Ok(pinv) = jf.j_new_t.clone().pseudo_inverse(1e-14) {
            w.pinv = w.pinv.max(rel_residual(&split.pseudo_inverse()?, &pinv, FLOOR));
            w.pinv_count += 1;
        }
    }

    let d = evaluate_dynamics(model, &s)?;
    let inverse = &d.m * &a + &d.c * &v + &d.g;
    let y_c = model.dynamics_regressor(&s, &v, &a)?;
    w.yc = w.yc.max(rel_residual_vec(&(&y_c * &truth.theta_c), &inverse, FLOOR));
    let y_a = model.adjugate_regressor(&s, &v, &a, &ks)?;
    w.ya = w.ya.max(rel_residual_vec(&(&y_a * &truth.theta_a), &(&split.r * (&inverse - &ks)), FLOOR));
    let y_b = model.determinant_regressor(&s.x)?;
    let t = (&y_b * &truth.theta_b)[0];
    w.yb = w.yb.max((t - split.t).abs() / split.t.abs().max(FLOOR));

    // Product blocks with random errors.
    let kin_err = DMatrix::from_fn(dims.l, dims.m, |_, _| rng.random_range(-1.0..1.0));
    let a_err = uniform(rng, dims.r, 1.0);
    let direct = &kin.y * &kin_err * (&y_a * &a_err);
    let via = &kin.y * assemble_yeta(dims.l, &y_a) * theta_eta(&kin_err, &a_err);
    w.yeta = w.yeta.max(rel_residual_vec(&via, &direct, FLOOR));
    let c_err = uniform(rng, dims.p, 1.0);
    let b_err = uniform(rng, dims.k, 1.0);
    let direct = &y_c * &c_err * (&y_b * &b_err)[0];
    let via = &y_c * assemble_ymu(dims.p, &y_b) * theta_mu(&c_err, &b_err);
    w.ymu = w.ymu.max(rel_residual_vec(&via, &direct, FLOOR));

    // Closed-loop regressor against the error dynamics at perturbed estimates.
    let a_hat = scaled(rng, &truth.theta_a, 0.1);
    let b_hat = scaled(rng, &truth.theta_b, 0.1);
    let c_hat = scaled(rng, &truth.theta_c, 0.1);
    let kin_hat = truth.theta_kin.map(|x| x * (1.0 + rng.random_range(-0.1..0.1)));
    let t_hat = (&y_b * &b_hat)[0];
    let lhs = kin.j_new_t() * (&y_a * &a_hat) / t_hat - (&inverse - &ks);
    let parts = YfParts { kin: &kin, y_a: &y_a, y_b: &y_b, y_c: &y_c, ks: &ks };
    let (y_f, _, _) = assemble_yf(&parts, &kin_hat, &c_hat, &b_hat)?;
    let a_err = &a_hat - &truth.theta_a;
    let b_err = &b_hat - &truth.theta_b;
    let layout = crate::regressor::ThetaLayout::new(dims);
    let tilde = layout.concat(
        &a_err,
        &theta_eta(&(&kin_hat - &truth.theta_kin), &a_err),
        &theta_mu(&(&c_hat - &truth.theta_c), &b_err),
        &b_err,
    );
    // Scale by the size of the individual terms, since lhs is a difference.
    let scale = (&inverse - &ks).amax().max(FLOOR);
    w.yf = w.yf.max((y_f * tilde - lhs).amax() / scale);

    w.sym = w.sym.max(rel_residual(&d.m, &d.m.transpose(), FLOOR));
    w.min_eig = w.min_eig.min(min_symmetric_eigenvalue(&d.m));
    w.skew = w.skew.max(check_skew_symmetry(model, &s, SKEW_STEP)?);
    Ok(())
}

/// Runs every property on one model.
pub fn validate_model(model: &dyn RobotModel, samples: usize, seed: u64) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Worst { min_eig: f64::INFINITY, ..Default::default() };
    for _ in 0..samples {
        sample_once(model, &mut rng, &mut w)?;
    }
    let mut t = Tracker { robot: model.name().into(), samples, results: Vec::new() };
    use Comparison::*;
    t.push("jacobian-factorization", w.factor, 1e-12, AtMost);
    t.push("kinematic-regressor", w.kin, 1e-12, AtMost);
    t.push("cramer", w.cramer, 1e-10, AtMost);
    t.push("pseudo-inverse", w.pinv, 1e-9, AtMost);
    t.push("dynamics-regressor", w.yc, 1e-9, AtMost);
    t.push("adjugate-regressor", w.ya, 1e-8, AtMost);
    t.push("determinant-regressor", w.yb, 1e-8, AtMost);
    t.push("kinematic-product", w.yeta, 1e-10, AtMost);
    t.push("determinant-product", w.ymu, 1e-12, AtMost);
    t.push("closed-loop-regressor", w.yf, 1e-8, AtMost);
    t.push("inertia-symmetry", w.sym, 1e-10, AtMost);
    t.push("inertia-min-eigenvalue", w.min_eig, 0.0, Above);
    t.push("skew-symmetry", w.skew, 1e-5, AtMost);
    if let Some(r) = t.results.iter_mut().find(|r| r.property == "pseudo-inverse") {
        r.samples = w.pinv_count;
    }
    Ok(t.results)
}

/// Both robots at their reference parameters.
pub fn validate_all(opts: &ValidateOptions) -> Result<Report> {
    let rpr = Rpr2::new(Rpr2Params::default())?;
    let cdr = Cdr4::new(Cdr4Params::default())?;
    let models: Vec<Box<dyn RobotModel>> = if opts.zero_coriolis {
        vec![Box::new(ZeroCoriolis(rpr)), Box::new(ZeroCoriolis(cdr))]
    } else {
        vec![Box::new(rpr), Box::new(cdr)]
    };
    let mut report = Report::default();
    for (i, model) in models.iter().enumerate() {
        report.results.extend(validate_model(model.as_ref(), opts.samples, opts.seed.wrapping_add(i as u64))?);
    }
    Ok(report)
}
