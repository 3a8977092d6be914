//! Adaptive trajectory tracking for parallel robots whose kinematic and
//! dynamic parameters are both uncertain.
//!
//! The controller never inverts an estimated Jacobian. The transposed
//! Jacobian is factored as `J^T = J_new^T L^-1`, where `J_new^T` is linear in
//! the kinematic parameters and `L` holds the measured link lengths. The
//! pseudo-inverse of `J_new^T` is then split into an adjugate part `R` and a
//! determinant `T`. Each of those is linear in a parameter vector, so the
//! control law becomes a quotient of two regressor products:
//!
//! ```text
//! tau = L * (Y_a theta_a) / (Y_b theta_b)
//! ```
//!
//! Every block appearing in the closed-loop error equation is adapted by a
//! gradient law with per-element saturation.
//!
//! Module map:
//! * [`dynamics`]: task-space dynamics, the [`RobotModel`] interface and the
//!   structural checks on inertia and Coriolis terms.
//! * [`regressor`]: Jacobian factorization, adjugate/determinant split and
//!   assembly of every regressor block.
//! * [`controller`]: sliding variables, baseline and adaptive laws,
//!   projection and the Lyapunov diagnostic.
//! * [`robots`]: the planar 2-RPR mechanism and the suspended 4-cable robot.
//! * [`sim`]: scenarios, trajectories, RK4 closed loop, metrics and CSV logs.
//! * [`validate`]: sampled property suites over both robots.
//! * [`plot`]: dependency-free SVG line charts.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod plot;
pub mod regressor;
pub mod robots;
pub mod sim;
pub mod validate;

pub use dynamics::{DynamicsEval, ModelDims, RobotModel, TaskState, Workspace};
pub use error::{Error, Result};

/// Standard gravity used by both robots (m/s^2).
pub const GRAVITY: f64 = 9.81;

/// Threshold on `|T|` below which the determinant is treated as singular.
pub const EPS_DET: f64 = 1e-6;

/// Minimum admissible link or cable length (m).
pub const EPS_LEN: f64 = 1e-6;
