//! Analytic desired trajectories.

use std::f64::consts::TAU;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::controller::Reference;
use crate::{Error, Result};

/// Circle and spiral trace
/// `x = c_x - r cos(w t)`, `y = c_y + r sin(w t)` with `w = 2 pi / period`;
/// the spiral also climbs `z = c_z + vertical_rate t`. Coordinates beyond the
/// first two (or three for the spiral) are held at the centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrajectorySpec {
    Circle { center: Vec<f64>, radius: f64, period: f64 },
    Spiral { center: Vec<f64>, radius: f64, period: f64, vertical_rate: f64 },
    Hold { center: Vec<f64> },
}

impl TrajectorySpec {
    pub fn center(&self) -> &[f64] {
        match self {
            TrajectorySpec::Circle { center, .. }
            | TrajectorySpec::Spiral { center, .. }
            | TrajectorySpec::Hold { center } => center,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let center = self.center();
        if center.len() != n {
            return Err(Error::InvalidScenario(format!(
                "trajectory center has {} coordinates, robot has {n}",
                center.len()
            )));
        }
        let min_dim = match self {
            TrajectorySpec::Circle { .. } => 2,
            TrajectorySpec::Spiral { .. } => 3,
            TrajectorySpec::Hold { .. } => 1,
        };
        if n < min_dim {
            return Err(Error::InvalidScenario(format!("trajectory needs at least {min_dim} coordinates")));
        }
        match self {
            TrajectorySpec::Circle { radius, period, .. } | TrajectorySpec::Spiral { radius, period, .. } => {
                if !(*period > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidScenario("trajectory period must be positive".into()));
                }
            }
            TrajectorySpec::Hold { .. } => {}
        }
        Ok(())
    }

    /// Desired position, velocity and acceleration at `t`.
    pub fn evaluate(&self, t: f64) -> Reference {
        let c = self.center();
        let n = c.len();
        let mut xd = DVector::from_column_slice(c);
        let mut vd = DVector::zeros(n);
        let mut ad = DVector::zeros(n);
        let mut circle = |radius: f64, period: f64| {
            let w = TAU / period;
            let (sn, cs) = (w * t).sin_cos();
            xd[0] -= radius * cs;
            xd[1] += radius * sn;
            vd[0] = radius * w * sn;
            vd[1] = radius * w * cs;
            ad[0] = radius * w * w * cs;
            ad[1] = -radius * w * w * sn;
        };
        match self {
            TrajectorySpec::Circle { radius, period, .. } => circle(*radius, *period),
            TrajectorySpec::Spiral { radius, period, vertical_rate, .. } => {
                circle(*radius, *period);
                xd[2] += vertical_rate * t;
                vd[2] = *vertical_rate;
            }
            TrajectorySpec::Hold { .. } => {}
        }
        Reference { xd, vd, ad }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spiral() -> TrajectorySpec {
        TrajectorySpec::Spiral { center: vec![0.48, -0.22, 1.5], radius: 0.1, period: 5.0, vertical_rate: 0.0075 }
    }

    #[test]
    fn spiral_starts_at_offset_point() {
        let r = spiral().evaluate(0.0);
        assert!((r.xd - DVector::from_vec(vec![0.38, -0.22, 1.5])).amax() < 1e-15);
    }

    #[test]
    fn spiral_climbs_at_constant_rate() {
        for t in [0.0, 1.3, 17.0, 59.9] {
            assert_eq!(spiral().evaluate(t).vd[2], 0.0075);
        }
    }

    #[test]
    fn hold_has_zero_derivatives() {
        let r = TrajectorySpec::Hold { center: vec![0.1, 0.2] }.evaluate(3.0);
        assert_eq!(r.vd, DVector::zeros(2));
        assert_eq!(r.ad, DVector::zeros(2));
    }

    #[test]
    fn derivatives_match_central_differences() {
        let spec = spiral();
        let h = 1e-5;
        for t in [0.4, 2.2, 7.9] {
            let (p, m, c) = (spec.evaluate(t + h), spec.evaluate(t - h), spec.evaluate(t));
            assert!(((&p.xd - &m.xd) / (2.0 * h) - &c.vd).amax() < 1e-8);
            assert!(((&p.vd - &m.vd) / (2.0 * h) - &c.ad).amax() < 1e-8);
        }
    }
}
