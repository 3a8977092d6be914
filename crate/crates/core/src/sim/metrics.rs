//! Tracking metrics over a logged run.

use serde::Serialize;

use crate::sim::run::LogRow;

/// Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub duration: f64,
    pub tail_start: f64,
    /// Per-axis `max |e|` over the tail window.
    pub tail_max_error: Vec<f64>,
    /// Per-axis RMS error over the tail window.
    pub tail_rms_error: Vec<f64>,
    /// Per-axis RMS error over the whole run.
    pub rms_error: Vec<f64>,
    pub final_error: Vec<f64>,
    pub settle_band: f64,
    /// First time after which every axis stays inside the band.
    pub settling_time: Option<f64>,
    /// Largest per-step change of any actuator force.
    pub max_tau_step: f64,
    pub max_tau: f64,
    pub min_tau: f64,
    pub lyapunov_initial: f64,
    pub lyapunov_final: f64,
}

impl Metrics {
    /// Pretty JSON with keys in field order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

/// Panics if `rows` is empty.
pub fn compute_metrics(rows: &[LogRow], tail_fraction: f64, band: f64) -> Metrics {
    assert!(!rows.is_empty(), "metrics need at least one row");
    let n = rows[0].e.len();
    let first = rows[0].t;
    let last = rows[rows.len() - 1].t;
    let tail_start = last - (last - first) * tail_fraction;
    let tail: Vec<&LogRow> = rows.iter().filter(|r| r.t >= tail_start - 1e-12).collect();

    let tail_max_error = (0..n)
        .map(|i| tail.iter().map(|r| r.e[i].abs()).fold(0.0, f64::max))
        .collect();
    let tail_rms_error = (0..n).map(|i| rms(tail.iter().map(|r| r.e[i]))).collect();
    let rms_error = (0..n).map(|i| rms(rows.iter().map(|r| r.e[i]))).collect();

    let outside = rows
        .iter()
        .rposition(|r| r.e.iter().any(|e| e.abs() >= band));
    let settling_time = match outside {
        None => Some(first),
        Some(k) if k + 1 < rows.len() => Some(rows[k + 1].t),
        Some(_) => None,
    };

    let max_tau_step = rows
        .windows(2)
        .flat_map(|w| w[0].tau.iter().zip(&w[1].tau).map(|(a, b)| (b - a).abs()))
        .fold(0.0, f64::max);
    let taus = rows.iter().flat_map(|r| r.tau.iter().copied());
    let (min_tau, max_tau) = taus.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));

    Metrics {
        duration: last - first,
        tail_start,
        tail_max_error,
        tail_rms_error,
        rms_error,
        final_error: rows[rows.len() - 1].e.clone(),
        settle_band: band,
        settling_time,
        max_tau_step,
        max_tau,
        min_tau,
        lyapunov_initial: rows[0].v,
        lyapunov_final: rows[rows.len() - 1].v,
    }
}
