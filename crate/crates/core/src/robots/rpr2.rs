//! Planar two-legged RPR robot.
//!
//! Each leg is a cylinder hinged at a base point `B_i` with a piston sliding
//! inside it; the pistons meet at the end-effector `X = (x, y)`. Bases sit at
//! `B_1 = (0, 0)` and `B_2 = (a, 0)`.
//!
//! With `d = X - B_i`, `l = |d|`, `d_perp = (-d_y, d_x)` and both legs sharing
//! mass `m`, centre of mass offset `c` and rotational inertia `I`:
//!
//! ```text
//! M = (m_p + 2m) I_2 + sum_i f(l_i) d_perp d_perp^T,   f(l) = (I + 2mc^2)/l^4 - 2mc/l^3
//! G = (0, (m_p + 2m) g)
//! ```
//!
//! The cylinder's centre of mass is `c` from its hinge and the piston's is
//! `l - c` from the same hinge. `C` comes from the Christoffel symbols of `M`.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::poly::{mat_add, mat_scale, mat_vec, outer, Poly, PolyMat2, DEGREE};
use crate::dynamics::{christoffel_matrix, DynamicsEval, ModelDims, RobotModel, TaskState, Workspace};
use crate::regressor::{KinematicRegressor, ParameterSet};
use crate::{Error, Result, EPS_DET, EPS_LEN, GRAVITY};

/// Physical parameters. Both legs share the same link values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rpr2Params {
    /// Mass of each cylinder and of each piston (kg).
    pub link_mass: f64,
    /// Centre-of-mass offset of each cylinder from its hinge, and of each
    /// piston from the end-effector (m).
    pub link_com: f64,
    /// Rotational inertia of each leg about its hinge axis (kg m^2).
    pub link_inertia: f64,
    pub platform_mass: f64,
    /// Distance between the two base hinges (m).
    pub base_width: f64,
    pub gravity: f64,
}

impl Default for Rpr2Params {
    fn default() -> Self {
        Self {
            link_mass: 1.0,
            link_com: 0.5,
            link_inertia: 0.1,
            platform_mass: 2.0,
            base_width: 1.0,
            gravity: GRAVITY,
        }
    }
}

impl Rpr2Params {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("link_mass", self.link_mass),
            ("link_com", self.link_com),
            ("link_inertia", self.link_inertia),
            ("platform_mass", self.platform_mass),
            ("base_width", self.base_width),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScenario(format!("rpr2 {name} must be positive, got {v}")));
            }
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidScenario("rpr2 gravity must be finite".into()));
        }
        Ok(())
    }
}

/// Index of `theta_c` entries: the four link groups `m, I, mc^2, mc` at
/// power `k` of the base width, plus `m_p` at index 4.
const GROUPS: usize = 4;
const MP: usize = 4;
const P: usize = 5 + GROUPS * DEGREE;
const R: usize = P + GROUPS + 3;

fn group_index(group: usize, power: usize) -> usize {
    match power {
        0 => group,
        k if k <= DEGREE => 5 + GROUPS * (k - 1) + group,
        _ => P + group,
    }
}

/// Column in `theta_a` of `a * theta_c[j]`.
fn shifted_index(j: usize) -> usize {
    if j == MP {
        return P + GROUPS;
    }
    let (group, power) = if j < MP { (j, 0) } else { ((j - 5) % GROUPS, (j - 5) / GROUPS + 1) };
    group_index(group, power + 1)
}

const COL_ONE: usize = P + GROUPS + 1;
const COL_A: usize = P + GROUPS + 2;

#[derive(Debug, Clone)]
pub struct Rpr2 {
    params: Rpr2Params,
    workspace: Workspace,
}

impl Rpr2 {
    pub fn new(params: Rpr2Params) -> Result<Self> {
        params.validate()?;
        let a = params.base_width;
        if a <= 0.2 {
            return Err(Error::InvalidScenario(format!("rpr2 base_width {a} leaves no workspace")));
        }
        let workspace = Workspace::new(vec![0.1, 0.2], vec![a - 0.1, 1.5]);
        Ok(Self { params, workspace })
    }

    pub fn params(&self) -> &Rpr2Params {
        &self.params
    }

    fn bases(&self) -> [Vector2<f64>; 2] {
        [Vector2::zeros(), Vector2::new(self.params.base_width, 0.0)]
    }

    fn legs(&self, x: &DVector<f64>) -> [(Vector2<f64>, f64); 2] {
        let p = Vector2::new(x[0], x[1]);
        self.bases().map(|b| {
            let d = p - b;
            (d, d.norm())
        })
    }

    fn rotational(&self) -> f64 {
        let p = &self.params;
        p.link_inertia + 2.0 * p.link_mass * p.link_com * p.link_com
    }

    fn translational(&self) -> f64 {
        self.params.platform_mass + 2.0 * self.params.link_mass
    }

    /// `f(l)` and `f'(l)`.
    fn leg_weight(&self, l: f64) -> (f64, f64) {
        let j = self.rotational();
        let mc = self.params.link_mass * self.params.link_com;
        (j / l.powi(4) - 2.0 * mc / l.powi(3), -4.0 * j / l.powi(5) + 6.0 * mc / l.powi(4))
    }

    fn inertia_derivatives(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut dm = vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)];
        let e_perp = [Vector2::new(0.0, 1.0), Vector2::new(-1.0, 0.0)];
        for (d, l) in self.legs(x) {
            let (f, df) = self.leg_weight(l);
            let dp = Vector2::new(-d.y, d.x);
            let proj = dp * dp.transpose();
            for k in 0..2 {
                let ek = e_perp[k] * dp.transpose() + dp * e_perp[k].transpose();
                let term = proj * (df * d[k] / l) + ek * f;
                dm[k] += DMatrix::from_column_slice(2, 2, term.as_slice());
            }
        }
        dm
    }

    /// `N_p a_ref + C(N_p, xdot) v_ref` for one leg, `N_p = d_perp d_perp^T / l^p`,
    /// as polynomials in the base width. `beta` is the leg's base offset in
    /// units of the base width.
    fn leg_q(beta: f64, x: &DVector<f64>, xdot: &DVector<f64>, l: f64, p: i32, v: [f64; 2], acc: [f64; 2]) -> [Poly; 2] {
        let d = [Poly::linear(x[0], -beta), Poly::constant(x[1])];
        let dp = [-d[1], d[0]];
        let proj = outer(dp, dp);
        let lp = Poly::constant(l.powi(-p));
        let n = mat_scale(&proj, lp);
        let e_perp = [[Poly::ZERO, Poly::constant(1.0)], [Poly::constant(-1.0), Poly::ZERO]];
        let dn: [PolyMat2; 2] = std::array::from_fn(|k| {
            let radial = mat_scale(&proj, d[k] * (-(p as f64) / (l * l)));
            let ek = mat_add(&outer(e_perp[k], dp), &outer(dp, e_perp[k]));
            mat_scale(&mat_add(&radial, &ek), lp)
        });
        let c: PolyMat2 = std::array::from_fn(|k| {
            std::array::from_fn(|j| {
                (0..2).fold(Poly::ZERO, |acc, i| {
                    acc + (dn[i][k][j] + dn[j][k][i] - dn[k][i][j]) * (0.5 * xdot[i])
                })
            })
        });
        let na = mat_vec(&n, acc);
        let cv = mat_vec(&c, v);
        [na[0] + cv[0], na[1] + cv[1]]
    }

    fn theta_c(&self) -> DVector<f64> {
        let p = &self.params;
        let groups = [
            p.link_mass,
            p.link_inertia,
            p.link_mass * p.link_com * p.link_com,
            p.link_mass * p.link_com,
        ];
        let mut th = DVector::zeros(P);
        for k in 0..=DEGREE {
            for (g, v) in groups.iter().enumerate() {
                th[group_index(g, k)] = v * p.base_width.powi(k as i32);
            }
        }
        th[MP] = p.platform_mass;
        th
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != 2 {
            return Err(Error::Dimension(format!("rpr2 expects 2 coordinates, got {}", x.len())));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("rpr2 position".into()));
        }
        Ok(())
    }
}

impl RobotModel for Rpr2 {
    fn name(&self) -> &str {
        "rpr2"
    }

    fn dims(&self) -> ModelDims {
        ModelDims { n: 2, m: 2, l: 1, r: R, k: 1, p: P }
    }

    fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    fn check_configuration(&self, x: &DVector<f64>) -> Result<()> {
        self.check_state(x)?;
        for (i, (_, l)) in self.legs(x).iter().enumerate() {
            if *l <= EPS_LEN {
                return Err(Error::DegenerateGeometry { link: i, length: *l });
            }
        }
        let t = self.params.base_width * x[1];
        if t.abs() <= EPS_DET {
            return Err(Error::Singular(format!("rpr2 det = {t:.3e} at y = {:.3e}", x[1])));
        }
        Ok(())
    }

    fn inertia(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state(x)?;
        let mut m = DMatrix::identity(2, 2) * self.translational();
        for (d, l) in self.legs(x) {
            if l <= EPS_LEN {
                return Err(Error::DegenerateGeometry { link: 0, length: l });
            }
            let (f, _) = self.leg_weight(l);
            let dp = Vector2::new(-d.y, d.x);
            let term = dp * dp.transpose() * f;
            m += DMatrix::from_column_slice(2, 2, term.as_slice());
        }
        Ok(m)
    }

    fn dynamics(&self, s: &TaskState) -> Result<DynamicsEval> {
        let m = self.inertia(&s.x)?;
        let c = christoffel_matrix(&self.inertia_derivatives(&s.x), &s.xdot);
        let g = DVector::from_vec(vec![0.0, self.translational() * self.params.gravity]);
        Ok(DynamicsEval { m, c, g })
    }

    fn link_lengths(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state(x)?;
        Ok(DVector::from_iterator(2, self.legs(x).iter().map(|(_, l)| *l)))
    }

    fn jacobian_transpose(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_configuration(x)?;
        let legs = self.legs(x);
        Ok(DMatrix::from_fn(2, 2, |i, j| legs[j].0[i] / legs[j].1))
    }

    fn jacobian_factors(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.check_configuration(x)?;
        let a = self.params.base_width;
        let j = DMatrix::from_row_slice(2, 2, &[x[0], x[0] - a, x[1], x[1]]);
        Ok((j, self.link_lengths(x)?))
    }

    fn kinematic_regressor(&self, x: &DVector<f64>) -> Result<KinematicRegressor> {
        self.check_state(x)?;
        Ok(KinematicRegressor {
            base: DMatrix::from_row_slice(2, 2, &[x[0], x[0], x[1], x[1]]),
            y: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            theta: self.parameters().theta_kin,
        })
    }

    /// Uses the state and the sensed leg lengths; the base width appears only
    /// through the polynomial split.
    fn dynamics_regressor(
        &self,
        s: &TaskState,
        v_ref: &DVector<f64>,
        a_ref: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check_configuration(&s.x)?;
        let lengths = self.link_lengths(&s.x)?;
        let v = [v_ref[0], v_ref[1]];
        let acc = [a_ref[0], a_ref[1]];
        let q = |p: i32| -> [[Poly; 2]; 2] {
            [0.0, 1.0].map(|beta| {
                let leg = (beta as usize).min(1);
                Self::leg_q(beta, &s.x, &s.xdot, lengths[leg], p, v, acc)
            })
        };
        let q4 = q(4);
        let q3 = q(3);
        let g = self.params.gravity;
        let alpha = [a_ref[0], a_ref[1] + g];

        let mut y = DMatrix::zeros(2, P);
        for row in 0..2 {
            y[(row, 0)] = 2.0 * alpha[row];
            y[(row, MP)] = alpha[row];
            for k in 0..=DEGREE {
                let mut rot = q4[1][row].coeff(k);
                let mut lin = q3[1][row].coeff(k);
                if k == 0 {
                    rot += q4[0][row].coeff(0);
                    lin += q3[0][row].coeff(0);
                }
                y[(row, group_index(1, k))] = rot;
                y[(row, group_index(2, k))] = 2.0 * rot;
                y[(row, group_index(3, k))] = -2.0 * lin;
            }
        }
        Ok(y)
    }

    fn determinant_regressor(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_state(x)?;
        Ok(DMatrix::from_element(1, 1, x[1]))
    }

    fn adjugate_regressor(
        &self,
        s: &TaskState,
        v_ref: &DVector<f64>,
        a_ref: &DVector<f64>,
        ks: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        let y_c = self.dynamics_regressor(s, v_ref, a_ref)?;
        let (x, y) = (s.x[0], s.x[1]);
        let r1 = DMatrix::from_row_slice(2, 2, &[y, -x, -y, x]);
        let mut y_a = DMatrix::zeros(2, R);
        y_a.columns_mut(0, P).copy_from(&(&r1 * &y_c));
        for j in 0..P {
            // E = [[0, 1], [0, 0]] picks the second row into the first.
            y_a[(0, shifted_index(j))] += y_c[(1, j)];
        }
        let r1k = &r1 * ks;
        y_a[(0, COL_ONE)] -= r1k[0];
        y_a[(1, COL_ONE)] -= r1k[1];
        y_a[(0, COL_A)] -= ks[1];
        Ok(y_a)
    }

    fn parameters(&self) -> ParameterSet {
        let p = &self.params;
        let a = p.base_width;
        let theta_c = self.theta_c();
        let mut theta_a = DVector::zeros(R);
        theta_a.rows_mut(0, P).copy_from(&theta_c);
        let groups = [
            p.link_mass,
            p.link_inertia,
            p.link_mass * p.link_com * p.link_com,
            p.link_mass * p.link_com,
        ];
        for (g, v) in groups.iter().enumerate() {
            theta_a[group_index(g, DEGREE + 1)] = v * a.powi(DEGREE as i32 + 1);
        }
        theta_a[P + GROUPS] = p.platform_mass * a;
        theta_a[COL_ONE] = 1.0;
        theta_a[COL_A] = a;
        ParameterSet {
            theta_kin: DMatrix::from_row_slice(1, 2, &[0.0, -a]),
            theta_a,
            theta_b: DVector::from_element(1, a),
            theta_c,
        }
    }
}
