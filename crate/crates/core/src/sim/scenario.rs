//! Scenario files: one reproducible closed-loop run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerGains, ControllerKind};
use crate::robots::RobotSpec;
use crate::sim::trajectory::TrajectorySpec;
use crate::{Error, Result};

/// Isotropic gains: `Gamma = gamma I`, `K = k I`, `Lambda = lambda I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub gamma: f64,
    pub k: f64,
    pub lambda: f64,
}

impl GainsSpec {
    pub fn build(&self, n: usize, q: usize) -> ControllerGains {
        ControllerGains::isotropic(n, q, self.gamma, self.k, self.lambda)
    }
}

fn default_name() -> String {
    "scenario".into()
}
fn default_dt() -> f64 {
    1e-3
}
fn default_tail() -> f64 {
    0.5
}
fn default_band() -> f64 {
    1e-3
}
fn default_margin() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub controller: ControllerKind,
    /// Half-width of the uniform relative perturbation of every physical
    /// parameter used to build the nominal model.
    pub perturbation_pct: f64,
    /// Relative half-width of the box the adapted estimates live in.
    pub bound_pct: f64,
    /// Lowest admissible ratio of worst-case estimated determinant to the
    /// true one along the desired path.
    #[serde(default = "default_margin")]
    pub det_margin: f64,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of Gaussian position noise seen by the controller (m).
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default = "default_band")]
    pub settle_band: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    pub robot: RobotSpec,
    pub gains: GainsSpec,
    pub trajectory: TrajectorySpec,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Number of integration steps.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration >= self.dt) {
            return bad(format!("duration {} shorter than dt {}", self.duration, self.dt));
        }
        let ratio = self.duration / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return bad(format!("duration {} is not a whole number of steps of {}", self.duration, self.dt));
        }
        if !(0.0..1.0).contains(&self.perturbation_pct) {
            return bad(format!("perturbation_pct {} outside [0, 1)", self.perturbation_pct));
        }
        if !(self.bound_pct > 0.0 && self.bound_pct < 1.0) {
            return bad(format!("bound_pct {} outside (0, 1)", self.bound_pct));
        }
        if self.perturbation_pct >= self.bound_pct {
            return bad(format!(
                "perturbation_pct {} must be below bound_pct {}",
                self.perturbation_pct, self.bound_pct
            ));
        }
        if !(self.det_margin > 0.0 && self.det_margin < 1.0) {
            return bad(format!("det_margin {} outside (0, 1)", self.det_margin));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be nonnegative".into());
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return bad(format!("tail_fraction {} outside (0, 1]", self.tail_fraction));
        }
        if !(self.settle_band > 0.0) {
            return bad("settle_band must be positive".into());
        }
        let n = match &self.robot {
            RobotSpec::Rpr2(p) => {
                p.validate()?;
                2
            }
            RobotSpec::Cdr4(p) => {
                p.validate()?;
                3
            }
        };
        if self.x0.len() != n {
            return bad(format!("x0 has {} coordinates, robot has {n}", self.x0.len()));
        }
        if let Some(v0) = &self.v0 {
            if v0.len() != n {
                return bad(format!("v0 has {} coordinates, robot has {n}", v0.len()));
            }
        }
        self.trajectory.validate(n)?;
        for (name, v) in [("gamma", self.gains.gamma), ("k", self.gains.k), ("lambda", self.gains.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("gain {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}
