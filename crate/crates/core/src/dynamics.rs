//! Task-space rigid-body dynamics `M(X) Xdd + C(X, Xd) Xd + G(X) = J^T tau`
//! and the model interface shared by every robot.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::regressor::{KinematicRegressor, ParameterSet};
use crate::{Error, Result};

/// End-effector position and velocity in task space.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskState {
    pub x: DVector<f64>,
    pub xdot: DVector<f64>,
}

impl TaskState {
    pub fn new(x: DVector<f64>, xdot: DVector<f64>) -> Self {
        Self { x, xdot }
    }

    pub fn at_rest(x: DVector<f64>) -> Self {
        let n = x.len();
        Self { x, xdot: DVector::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.xdot.iter()).all(|v| v.is_finite())
    }
}

/// `M`, `C` and `G` at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsEval {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub g: DVector<f64>,
}

/// Axis-aligned sampling box for task-space positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Workspace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(lower.iter().zip(&upper).all(|(l, u)| l < u));
        Self { lower, upper }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.lower.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Uniform sample of a position inside the box.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.lower.len(),
            self.lower.iter().zip(&self.upper).map(|(l, u)| rng.random_range(*l..*u)),
        )
    }
}

/// Dimensions of a model and of its regressor blocks.
///
/// `n` task-space dof, `m` actuators, `l` rows of `Theta`, `r` entries of
/// `theta_a`, `k` entries of `theta_b`, `p` entries of `theta_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelDims {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub r: usize,
    pub k: usize,
    pub p: usize,
}

impl ModelDims {
    /// Length of the full adapted vector `(theta_a, theta_eta, theta_mu, theta_b)`.
    pub fn q(&self) -> usize {
        self.r + self.m * self.r * self.l + self.p * self.k + self.k
    }

    pub fn redundant(&self) -> bool {
        self.m > self.n
    }
}

/// A parallel robot written in task space.
///
/// Regressor providers are functions of the state, the reference signals and
/// the *measured* link lengths only; the model's own parameter values enter
/// exclusively through [`RobotModel::parameters`] and through the plant
/// quantities (`inertia`, `dynamics`, Jacobians).
pub trait RobotModel: Send + Sync {
    fn name(&self) -> &str;

    fn dims(&self) -> ModelDims;

    fn workspace(&self) -> &Workspace;

    /// Rejects states at degenerate geometry or at a kinematic singularity.
    fn check_configuration(&self, x: &DVector<f64>) -> Result<()>;

    fn inertia(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn dynamics(&self, s: &TaskState) -> Result<DynamicsEval>;

    fn link_lengths(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// `J^T` built directly from unit link vectors (n x m).
    fn jacobian_transpose(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// `(J_new^T, L)` from the geometry, with `J^T = J_new^T diag(L)^-1`.
    fn jacobian_factors(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)>;

    /// `J_new^T = base + Y Theta`, with this model's `Theta`.
    fn kinematic_regressor(&self, x: &DVector<f64>) -> Result<KinematicRegressor>;

    /// `Y_c` with `Y_c theta_c = M a_ref + C v_ref + G` (n x p).
    fn dynamics_regressor(
        &self,
        s: &TaskState,
        v_ref: &DVector<f64>,
        a_ref: &DVector<f64>,
    ) -> Result<DMatrix<f64>>;

    /// `Y_b` with `Y_b theta_b = T` (1 x k).
    fn determinant_regressor(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// `Y_a` with `Y_a theta_a = R (M a_ref + C v_ref + G - KS)` (m x r).
    fn adjugate_regressor(
        &self,
        s: &TaskState,
        v_ref: &DVector<f64>,
        a_ref: &DVector<f64>,
        ks: &DVector<f64>,
    ) -> Result<DMatrix<f64>>;

    /// Parameter vectors evaluated at this model's physical parameters.
    fn parameters(&self) -> ParameterSet;
}

fn check_dims(model: &dyn RobotModel, s: &TaskState) -> Result<()> {
    let n = model.dims().n;
    if s.x.len() != n || s.xdot.len() != n {
        return Err(Error::Dimension(format!(
            "state has lengths ({}, {}), model {} expects {n}",
            s.x.len(),
            s.xdot.len(),
            model.name()
        )));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("task state".into()));
    }
    Ok(())
}

pub fn evaluate_dynamics(model: &dyn RobotModel, s: &TaskState) -> Result<DynamicsEval> {
    check_dims(model, s)?;
    model.check_configuration(&s.x)?;
    model.dynamics(s)
}

/// `Xdd = M^-1 (J^T tau - C Xd - G)`.
pub fn forward_acceleration(
    model: &dyn RobotModel,
    s: &TaskState,
    tau: &DVector<f64>,
) -> Result<DVector<f64>> {
    let dims = model.dims();
    if tau.len() != dims.m {
        return Err(Error::Dimension(format!("tau has {} entries, expected {}", tau.len(), dims.m)));
    }
    let dynamics = evaluate_dynamics(model, s)?;
    let jt = model.jacobian_transpose(&s.x)?;
    let rhs = jt * tau - &dynamics.c * &s.xdot - &dynamics.g;
    match dynamics.m.clone().cholesky() {
        Some(chol) => Ok(chol.solve(&rhs)),
        None => Err(Error::SingularInertia(crate::linalg::min_symmetric_eigenvalue(&dynamics.m))),
    }
}

/// `max |A + A^T|` with `A = Mdot - 2C`, where `Mdot` is a central difference
/// of `M` along the state's own velocity.
pub fn check_skew_symmetry(model: &dyn RobotModel, s: &TaskState, h: f64) -> Result<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let fwd = model.inertia(&(&s.x + &s.xdot * h))?;
    let bwd = model.inertia(&(&s.x - &s.xdot * h))?;
    let m_dot = (fwd - bwd) / (2.0 * h);
    let c = model.dynamics(s)?.c;
    let a = m_dot - c * 2.0;
    Ok(crate::linalg::max_abs(&(&a + a.transpose())))
}

/// `(Y_c, theta_c)` of the model at its own parameters.
pub fn dynamics_regressor(
    model: &dyn RobotModel,
    s: &TaskState,
    v_ref: &DVector<f64>,
    a_ref: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_dims(model, s)?;
    let yc = model.dynamics_regressor(s, v_ref, a_ref)?;
    Ok((yc, model.parameters().theta_c))
}

/// Coriolis matrix from Christoffel symbols of the first kind.
///
/// `dm[i]` is `dM/dX_i`. The result satisfies `Mdot - 2C` skew-symmetric.
pub fn christoffel_matrix(dm: &[DMatrix<f64>], xdot: &DVector<f64>) -> DMatrix<f64> {
    let n = xdot.len();
    assert_eq!(dm.len(), n);
    DMatrix::from_fn(n, n, |k, j| {
        0.5 * (0..n)
            .map(|i| (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]) * xdot[i])
            .sum::<f64>()
    })
}

/// Wraps a model and reports `C = 0`. Negative control for the skew check.
pub struct ZeroCoriolis<M>(pub M);

impl<M: RobotModel> RobotModel for ZeroCoriolis<M> {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn dims(&self) -> ModelDims {
        self.0.dims()
    }
    fn workspace(&self) -> &Workspace {
        self.0.workspace()
    }
    fn check_configuration(&self, x: &DVector<f64>) -> Result<()> {
        self.0.check_configuration(x)
    }
    fn inertia(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.0.inertia(x)
    }
    fn dynamics(&self, s: &TaskState) -> Result<DynamicsEval> {
        let mut d = self.0.dynamics(s)?;
        d.c.fill(0.0);
        Ok(d)
    }
    fn link_lengths(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.0.link_lengths(x)
    }
    fn jacobian_transpose(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.0.jacobian_transpose(x)
    }
    fn jacobian_factors(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.0.jacobian_factors(x)
    }
    fn kinematic_regressor(&self, x: &DVector<f64>) -> Result<KinematicRegressor> {
        self.0.kinematic_regressor(x)
    }
    fn dynamics_regressor(
        &self,
        s: &TaskState,
        v_ref: &DVector<f64>,
        a_ref: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.0.dynamics_regressor(s, v_ref, a_ref)
    }
    fn determinant_regressor(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.0.determinant_regressor(x)
    }
    fn adjugate_regressor(
        &self,
        s: &TaskState,
        v_ref: &DVector<f64>,
        a_ref: &DVector<f64>,
        ks: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.0.adjugate_regressor(s, v_ref, a_ref, ks)
    }
    fn parameters(&self) -> ParameterSet {
        self.0.parameters()
    }
}
