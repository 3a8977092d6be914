//! Concrete robot models and their serializable parameter sets.

mod cdr4;
mod poly;
mod rpr2;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cdr4::{Cdr4, Cdr4Params};
pub use poly::Poly;
pub use rpr2::{Rpr2, Rpr2Params};

use crate::dynamics::RobotModel;
use crate::{Error, Result};

/// A robot and its physical parameters, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RobotSpec {
    Rpr2(Rpr2Params),
    Cdr4(Cdr4Params),
}

impl RobotSpec {
    pub fn build(&self) -> Result<Arc<dyn RobotModel>> {
        Ok(match self {
            RobotSpec::Rpr2(p) => Arc::new(Rpr2::new(p.clone())?),
            RobotSpec::Cdr4(p) => Arc::new(Cdr4::new(p.clone())?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RobotSpec::Rpr2(_) => "rpr2",
            RobotSpec::Cdr4(_) => "cdr4",
        }
    }

    /// Multiplies every physical parameter except gravity by `1 + u`,
    /// `u ~ U[-pct, pct]`, drawn in declaration order from a ChaCha8 stream.
    pub fn perturbed(&self, pct: f64, seed: u64) -> Result<RobotSpec> {
        if !(0.0..1.0).contains(&pct) {
            return Err(Error::InvalidScenario(format!("perturbation {pct} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut factor = || 1.0 + rng.random_range(-pct..=pct);
        Ok(match self {
            RobotSpec::Rpr2(p) => RobotSpec::Rpr2(Rpr2Params {
                link_mass: p.link_mass * factor(),
                link_com: p.link_com * factor(),
                link_inertia: p.link_inertia * factor(),
                platform_mass: p.platform_mass * factor(),
                base_width: p.base_width * factor(),
                gravity: p.gravity,
            }),
            RobotSpec::Cdr4(p) => RobotSpec::Cdr4(Cdr4Params {
                mass: p.mass * factor(),
                width_x: p.width_x * factor(),
                width_y: p.width_y * factor(),
                height: p.height * factor(),
                gravity: p.gravity,
            }),
        })
    }
}
