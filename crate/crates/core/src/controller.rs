//! Sliding-variable tracking control: the non-adaptive pseudo-inverse law and
//! the adaptive adjugate/determinant quotient law with projected adaptation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{RobotModel, TaskState};
use crate::regressor::{self, ThetaLayout, YfParts};
use crate::{Error, Result, EPS_DET};

/// `Gamma` and `K` are n x n; `Lambda` is diagonal and stored as its
/// diagonal (length q).
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub gamma: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

impl ControllerGains {
    pub fn isotropic(n: usize, q: usize, gamma: f64, k: f64, lambda: f64) -> Self {
        Self {
            gamma: DMatrix::identity(n, n) * gamma,
            k: DMatrix::identity(n, n) * k,
            lambda: DVector::from_element(q, lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pd = |name: &str, m: &DMatrix<f64>| -> Result<()> {
            let min = crate::linalg::min_symmetric_eigenvalue(m);
            if !(min > 0.0) {
                return Err(Error::InvalidScenario(format!("{name} is not positive definite (min eig {min})")));
            }
            Ok(())
        };
        pd("gamma", &self.gamma)?;
        if crate::linalg::max_abs(&(&self.k - self.k.transpose())) > 1e-12 {
            return Err(Error::InvalidScenario("K is not symmetric".into()));
        }
        pd("K", &self.k)?;
        if !self.lambda.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidScenario("Lambda must have positive diagonal".into()));
        }
        Ok(())
    }
}

/// Desired position, velocity and acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub xd: DVector<f64>,
    pub vd: DVector<f64>,
    pub ad: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sliding {
    pub err: DVector<f64>,
    pub s: DVector<f64>,
    pub v_ref: DVector<f64>,
    pub a_ref: DVector<f64>,
}

/// `X~ = X - X_d`, `v_ref = X_d' - Gamma X~`, `S = X' - v_ref` (equal to
/// `X~' + Gamma X~`), `a_ref = X_d'' - Gamma X~'`.
pub fn sliding_variables(s: &TaskState, r: &Reference, gamma: &DMatrix<f64>) -> Sliding {
    let err = &s.x - &r.xd;
    let err_dot = &s.xdot - &r.vd;
    let v_ref = &r.vd - gamma * &err;
    Sliding {
        s: &s.xdot - &v_ref,
        v_ref,
        a_ref: &r.ad - gamma * &err_dot,
        err,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub tau: DVector<f64>,
    pub sliding: Sliding,
    /// Determinant used in the quotient (estimated for the adaptive law).
    pub t_hat: f64,
}

/// `tau = L o R (M a_ref + C v_ref + G - KS) / T` with `M, C, G, R, T` from
/// `nominal` and `L` the sensed lengths.
pub fn baseline_control(
    nominal: &dyn RobotModel,
    lengths: &DVector<f64>,
    s: &TaskState,
    r: &Reference,
    gains: &ControllerGains,
) -> Result<ControlOutput> {
    let sl = sliding_variables(s, r, &gains.gamma);
    let dynamics = nominal.dynamics(s)?;
    let w = &dynamics.m * &sl.a_ref + &dynamics.c * &sl.v_ref + &dynamics.g - &gains.k * &sl.s;
    let (j_new_t, _) = nominal.jacobian_factors(&s.x)?;
    let split = regressor::adjugate_determinant(&j_new_t, nominal.dims().redundant());
    if split.t.abs() <= EPS_DET {
        return Err(Error::Singular(format!("nominal |T| = {:.3e}", split.t.abs())));
    }
    let tau = (&split.r * w / split.t).component_mul(lengths);
    Ok(ControlOutput { tau, sliding: sl, t_hat: split.t })
}

/// Fixed (non-adapted) estimates entering the closed-loop regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedEstimates {
    pub theta_kin: DMatrix<f64>,
    pub theta_c: DVector<f64>,
}

/// Box constraint on the adapted vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub theta_hat: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub layout: ThetaLayout,
}

impl AdaptiveState {
    pub fn new(theta_hat: DVector<f64>, lower: DVector<f64>, upper: DVector<f64>, layout: ThetaLayout) -> Result<Self> {
        let q = layout.len();
        if theta_hat.len() != q || lower.len() != q || upper.len() != q {
            return Err(Error::Dimension(format!("adaptive state must have length {q}")));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidScenario("adaptation bounds have lower > upper".into()));
        }
        let mut st = Self { theta_hat, lower, upper, layout };
        st.clamp();
        Ok(st)
    }

    pub fn clamp(&mut self) {
        clamp_into(&mut self.theta_hat, &self.lower, &self.upper);
    }

    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn theta_a(&self, theta: &DVector<f64>) -> DVector<f64> {
        theta.rows_range(self.layout.a()).into_owned()
    }

    pub fn theta_b(&self, theta: &DVector<f64>) -> DVector<f64> {
        theta.rows_range(self.layout.b()).into_owned()
    }
}

pub fn clamp_into(theta: &mut DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) {
    for ((v, l), u) in theta.iter_mut().zip(lower.iter()).zip(upper.iter()) {
        *v = v.clamp(*l, *u);
    }
}

/// Everything the adaptive law computes at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOutput {
    pub control: ControlOutput,
    pub y_f: DMatrix<f64>,
}

/// `tau = L o (Y_a theta_a_hat) / (Y_b theta_b_hat)`, with regressors taken
/// from `plant` (they depend on the state and sensed lengths only).
pub fn adaptive_control(
    plant: &dyn RobotModel,
    s: &TaskState,
    r: &Reference,
    gains: &ControllerGains,
    fixed: &FixedEstimates,
    theta_hat: &DVector<f64>,
    layout: &ThetaLayout,
) -> Result<AdaptiveOutput> {
    if theta_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameter estimate".into()));
    }
    plant.check_configuration(&s.x)?;
    let sl = sliding_variables(s, r, &gains.gamma);
    let ks = &gains.k * &sl.s;
    let y_a = plant.adjugate_regressor(s, &sl.v_ref, &sl.a_ref, &ks)?;
    let y_b = plant.determinant_regressor(&s.x)?;
    let y_c = plant.dynamics_regressor(s, &sl.v_ref, &sl.a_ref)?;
    let kin = plant.kinematic_regressor(&s.x)?;
    let lengths = plant.link_lengths(&s.x)?;

    let theta_a = theta_hat.rows_range(layout.a()).into_owned();
    let theta_b = theta_hat.rows_range(layout.b()).into_owned();
    let t_hat = (&y_b * &theta_b)[0];
    if !t_hat.is_finite() {
        return Err(Error::NonFinite("estimated determinant".into()));
    }
    if t_hat.abs() <= EPS_DET {
        return Err(Error::EstimatedSingularity { value: t_hat, threshold: EPS_DET });
    }
    let tau = (&y_a * &theta_a / t_hat).component_mul(&lengths);
    let parts = YfParts { kin: &kin, y_a: &y_a, y_b: &y_b, y_c: &y_c, ks: &ks };
    let (y_f, _, _) = regressor::assemble_yf(&parts, &fixed.theta_kin, &fixed.theta_c, &theta_b)?;
    Ok(AdaptiveOutput { control: ControlOutput { tau, sliding: sl, t_hat }, y_f })
}

/// Unconstrained rate `-Lambda^-1 Y_F^T S`.
pub fn raw_adaptation_rate(y_f: &DMatrix<f64>, s: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
    -(y_f.transpose() * s).component_div(lambda)
}

/// Projected rate: components pushing an estimate out through an active
/// bound face are zeroed.
pub fn adaptation_rate(
    y_f: &DMatrix<f64>,
    s: &DVector<f64>,
    lambda: &DVector<f64>,
    theta_hat: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> DVector<f64> {
    let mut rate = raw_adaptation_rate(y_f, s, lambda);
    for i in 0..rate.len() {
        if (theta_hat[i] >= upper[i] && rate[i] > 0.0) || (theta_hat[i] <= lower[i] && rate[i] < 0.0) {
            rate[i] = 0.0;
        }
    }
    rate
}

/// `V = 1/2 S^T M S + 1/2 theta~^T Lambda theta~`.
pub fn lyapunov_value(s: &DVector<f64>, m: &DMatrix<f64>, theta_tilde: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    0.5 * s.dot(&(m * s)) + 0.5 * theta_tilde.component_mul(theta_tilde).dot(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    #[default]
    Adaptive,
    Baseline,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sliding_example() {
        let s = TaskState::new(DVector::from_vec(vec![0.05, -0.06, 0.0]), DVector::zeros(3));
        let r = Reference { xd: DVector::zeros(3), vd: DVector::zeros(3), ad: DVector::zeros(3) };
        let sl = sliding_variables(&s, &r, &(DMatrix::identity(3, 3) * 20.0));
        assert!((sl.s - DVector::from_vec(vec![1.0, -1.2, 0.0])).amax() < 1e-14);
    }

    #[test]
    fn rate_vanishes_without_error_signal() {
        let y_f = DMatrix::from_element(2, 5, 3.0);
        let rate = raw_adaptation_rate(&y_f, &DVector::zeros(2), &DVector::from_element(5, 5.0));
        assert_eq!(rate, DVector::zeros(5));
    }

    #[test]
    fn projection_zeroes_only_outward_components() {
        let y_f = DMatrix::from_row_slice(1, 3, &[-1.0, -1.0, 1.0]);
        let s = DVector::from_element(1, 1.0);
        let lambda = DVector::from_element(3, 5.0);
        let theta = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let lo = DVector::from_element(3, -1.0);
        let hi = DVector::from_element(3, 1.0);
        // raw rate = (0.2, 0.2, -0.2): first and last point outward at active faces.
        let rate = adaptation_rate(&y_f, &s, &lambda, &theta, &lo, &hi);
        assert_eq!(rate.as_slice(), &[0.0, 0.2, 0.0]);
    }

    #[test]
    fn lyapunov_zero_iff_no_error() {
        let m = DMatrix::identity(2, 2);
        let lambda = DVector::from_element(3, 5.0);
        assert_eq!(lyapunov_value(&DVector::zeros(2), &m, &DVector::zeros(3), &lambda), 0.0);
        assert!(lyapunov_value(&DVector::zeros(2), &m, &DVector::from_vec(vec![0.0, 1e-3, 0.0]), &lambda) > 0.0);
    }
}
