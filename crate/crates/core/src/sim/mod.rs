//! Closed-loop scenario execution.

pub mod log;
pub mod metrics;
pub mod run;
pub mod scenario;
pub mod trajectory;

pub use metrics::{compute_metrics, Metrics};
pub use run::{prepare, run_comparison, run_prepared, run_scenario, LogRow, Prepared, SimLog};
pub use scenario::{GainsSpec, Scenario};
pub use trajectory::TrajectorySpec;

impl SimLog {
    pub fn metrics(&self, tail_fraction: f64, band: f64) -> Metrics {
        compute_metrics(&self.rows, tail_fraction, band)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> crate::Result<()> {
        log::write_csv(&self.rows, self.n, self.m, out)
    }
}
