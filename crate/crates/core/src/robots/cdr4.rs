//! Suspended four-cable robot with a point-mass end-effector.
//!
//! Anchors sit at the corners of a `b x a` rectangle at height `h`:
//! `A_i = (s_x b/2, s_y a/2, h)` with `s_x = (+, -, +, -)` and
//! `s_y = (+, +, -, -)`. Cable `i` pulls the end-effector towards `A_i`, so
//! `J_new^T` has columns `A_i - X` and positive `tau` is tension.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsEval, ModelDims, RobotModel, TaskState, Workspace};
use crate::regressor::{KinematicRegressor, ParameterSet};
use crate::{Error, Result, EPS_DET, EPS_LEN, GRAVITY};

const SX: [f64; 4] = [1.0, -1.0, 1.0, -1.0];
const SY: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

/// Number of kinematic monomials in the adjugate.
const KIN: usize = 8;
const R: usize = 2 * KIN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cdr4Params {
    pub mass: f64,
    /// Anchor spacing along x, `b` (m).
    pub width_x: f64,
    /// Anchor spacing along y, `a` (m).
    pub width_y: f64,
    /// Anchor height, `h` (m).
    pub height: f64,
    pub gravity: f64,
}

impl Default for Cdr4Params {
    fn default() -> Self {
        Self { mass: 4.5, width_x: 3.56, width_y: 7.05, height: 4.26, gravity: GRAVITY }
    }
}

impl Cdr4Params {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("width_x", self.width_x),
            ("width_y", self.width_y),
            ("height", self.height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScenario(format!("cdr4 {name} must be positive, got {v}")));
            }
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidScenario("cdr4 gravity must be finite".into()));
        }
        Ok(())
    }

    pub fn anchors(&self) -> [Vector3<f64>; 4] {
        std::array::from_fn(|i| {
            Vector3::new(SX[i] * self.width_x / 2.0, SY[i] * self.width_y / 2.0, self.height)
        })
    }
}

#[derive(Debug, Clone)]
pub struct Cdr4 {
    params: Cdr4Params,
    workspace: Workspace,
}

impl Cdr4 {
    pub fn new(params: Cdr4Params) -> Result<Self> {
        params.validate()?;
        let workspace = Workspace::new(vec![-1.2, -2.5, 0.5], vec![1.2, 2.5, 3.5]);
        Ok(Self { params, workspace })
    }

    pub fn params(&self) -> &Cdr4Params {
        &self.params
    }

    fn cables(&self, x: &DVector<f64>) -> [Vector3<f64>; 4] {
        let p = Vector3::new(x[0], x[1], x[2]);
        self.params.anchors().map(|a| a - p)
    }

    /// `R = J_new adj(J_new^T J_new)` in closed form (4 x 3).
    pub fn adjugate_closed_form(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (a, b, h) = (self.params.width_y, self.params.width_x, self.params.height);
        let z = x[2] - h;
        DMatrix::from_fn(4, 3, |i, j| match j {
            0 => 2.0 * SX[i] * a * a * b * z * z,
            1 => 2.0 * SY[i] * a * b * b * z * z,
            _ => -z * (a * a * b * b + 2.0 * SX[i] * a * a * b * x[0] + 2.0 * SY[i] * a * b * b * x[1]),
        })
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != 3 {
            return Err(Error::Dimension(format!("cdr4 expects 3 coordinates, got {}", x.len())));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("cdr4 position".into()));
        }
        Ok(())
    }
}

impl RobotModel for Cdr4 {
    fn name(&self) -> &str {
        "cdr4"
    }

    fn dims(&self) -> ModelDims {
        ModelDims { n: 3, m: 4, l: 3, r: R, k: 3, p: 1 }
    }

    fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    fn check_configuration(&self, x: &DVector<f64>) -> Result<()> {
        self.check_state(x)?;
        for (i, c) in self.cables(x).iter().enumerate() {
            if c.norm() <= EPS_LEN {
                return Err(Error::DegenerateGeometry { link: i, length: c.norm() });
            }
        }
        let p = &self.params;
        let z = x[2] - p.height;
        let t = 4.0 * (p.width_x * p.width_y * z).powi(2);
        if t <= EPS_DET {
            return Err(Error::Singular(format!("cdr4 det = {t:.3e} at anchor height")));
        }
        Ok(())
    }

    fn inertia(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state(x)?;
        Ok(DMatrix::identity(3, 3) * self.params.mass)
    }

    fn dynamics(&self, s: &TaskState) -> Result<DynamicsEval> {
        let m = self.inertia(&s.x)?;
        let g = DVector::from_vec(vec![0.0, 0.0, self.params.mass * self.params.gravity]);
        Ok(DynamicsEval { m, c: DMatrix::zeros(3, 3), g })
    }

    fn link_lengths(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state(x)?;
        Ok(DVector::from_iterator(4, self.cables(x).iter().map(|c| c.norm())))
    }

    fn jacobian_transpose(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_configuration(x)?;
        let cables = self.cables(x);
        Ok(DMatrix::from_fn(3, 4, |i, j| cables[j][i] / cables[j].norm()))
    }

    fn jacobian_factors(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.check_configuration(x)?;
        let cables = self.cables(x);
        Ok((DMatrix::from_fn(3, 4, |i, j| cables[j][i]), self.link_lengths(x)?))
    }

    fn kinematic_regressor(&self, x: &DVector<f64>) -> Result<KinematicRegressor> {
        self.check_state(x)?;
        Ok(KinematicRegressor {
            base: DMatrix::from_fn(3, 4, |i, _| -x[i]),
            y: DMatrix::identity(3, 3),
            theta: self.parameters().theta_kin,
        })
    }

    fn dynamics_regressor(
        &self,
        s: &TaskState,
        _v_ref: &DVector<f64>,
        a_ref: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check_state(&s.x)?;
        let mut y = a_ref.clone();
        y[2] += self.params.gravity;
        Ok(DMatrix::from_column_slice(3, 1, y.as_slice()))
    }

    /// `T = 4 a^2 b^2 (z - h)^2`.
    fn determinant_regressor(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state(x)?;
        let z = x[2];
        Ok(DMatrix::from_row_slice(1, 3, &[4.0 * z * z, -8.0 * z, 4.0]))
    }

    /// Columns pair up per kinematic monomial `K_j`: column `2j` multiplies
    /// `m K_j` and acts on `a_ref + g e_3`, column `2j + 1` multiplies `K_j`
    /// and acts on `-KS`.
    fn adjugate_regressor(
        &self,
        s: &TaskState,
        _v_ref: &DVector<f64>,
        a_ref: &DVector<f64>,
        ks: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check_state(&s.x)?;
        let (x, y, z) = (s.x[0], s.x[1], s.x[2]);
        let alpha = [a_ref[0], a_ref[1], a_ref[2] + self.params.gravity];
        let kappa = [-ks[0], -ks[1], -ks[2]];
        let mut out = DMatrix::zeros(4, R);
        for i in 0..4 {
            let (sx, sy) = (SX[i], SY[i]);
            // Coefficients of each monomial on (W1, W2, W3).
            let coeffs: [[f64; 3]; KIN] = [
                [2.0 * sx * z * z, 0.0, -2.0 * sx * x * z],
                [-4.0 * sx * z, 0.0, 2.0 * sx * x],
                [2.0 * sx, 0.0, 0.0],
                [0.0, 2.0 * sy * z * z, -2.0 * sy * y * z],
                [0.0, -4.0 * sy * z, 2.0 * sy * y],
                [0.0, 2.0 * sy, 0.0],
                [0.0, 0.0, -z],
                [0.0, 0.0, 1.0],
            ];
            for (j, c) in coeffs.iter().enumerate() {
                out[(i, 2 * j)] = c[0] * alpha[0] + c[1] * alpha[1] + c[2] * alpha[2];
                out[(i, 2 * j + 1)] = c[0] * kappa[0] + c[1] * kappa[1] + c[2] * kappa[2];
            }
        }
        Ok(out)
    }

    fn parameters(&self) -> ParameterSet {
        let p = &self.params;
        let (a, b, h, m) = (p.width_y, p.width_x, p.height, p.mass);
        let monomials = [
            a * a * b,
            a * a * b * h,
            a * a * b * h * h,
            a * b * b,
            a * b * b * h,
            a * b * b * h * h,
            a * a * b * b,
            a * a * b * b * h,
        ];
        let theta_a = DVector::from_iterator(R, monomials.iter().flat_map(|k| [m * k, *k]));
        let anchors = p.anchors();
        let ab2 = a * a * b * b;
        ParameterSet {
            theta_kin: DMatrix::from_fn(3, 4, |i, j| anchors[j][i]),
            theta_a,
            theta_b: DVector::from_vec(vec![ab2, ab2 * h, ab2 * h * h]),
            theta_c: DVector::from_element(1, m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_match_calibrated_corners() {
        let anchors = Cdr4Params::default().anchors();
        assert!((anchors[0] - Vector3::new(1.78, 3.525, 4.26)).norm() < 1e-12);
        assert!((anchors[3] - Vector3::new(-1.78, -3.525, 4.26)).norm() < 1e-12);
    }

    #[test]
    fn cable_lengths_equal_under_centre() {
        let model = Cdr4::new(Cdr4Params::default()).unwrap();
        let l = model.link_lengths(&DVector::zeros(3)).unwrap();
        let expect = (1.78f64.powi(2) + 3.525f64.powi(2) + 4.26f64.powi(2)).sqrt();
        for v in l.iter() {
            assert!((v - expect).abs() < 1e-12);
        }
    }
}
