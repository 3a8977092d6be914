//! Closed-loop execution: estimate initialisation, bounds, RK4 integration.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::controller::{
    self, AdaptiveState, ControllerGains, ControllerKind, FixedEstimates, Reference, Sliding,
};
use crate::dynamics::{forward_acceleration, RobotModel, TaskState};
use crate::regressor::{theta_eta, theta_mu, ThetaLayout};
use crate::robots::RobotSpec;
use crate::sim::scenario::Scenario;
use crate::{Error, Result, EPS_DET};

/// Number of points sampled along the desired path before a run.
pub const PATH_SAMPLES: usize = 1000;

/// Everything a run needs, derived deterministically from a [`Scenario`].
#[derive(Clone)]
pub struct Prepared {
    pub plant: Arc<dyn RobotModel>,
    pub nominal: Arc<dyn RobotModel>,
    pub nominal_spec: RobotSpec,
    pub layout: ThetaLayout,
    pub gains: ControllerGains,
    pub fixed: FixedEstimates,
    /// Initial estimate and its box.
    pub adaptive: AdaptiveState,
    /// Constant values the estimates are compared against in `V`.
    pub target: DVector<f64>,
    /// Relative half-width finally used for the determinant block.
    pub det_bound_pct: f64,
    /// `Theta^ - Theta` and `theta^_c - theta_c`; constant over a run.
    pub kin_error: DMatrix<f64>,
    pub c_error: DVector<f64>,
    pub initial: TaskState,
}

impl std::fmt::Debug for Prepared {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Prepared")
            .field("plant", &self.plant.name())
            .field("nominal_spec", &self.nominal_spec)
            .field("layout", &self.layout)
            .field("det_bound_pct", &self.det_bound_pct)
            .finish_non_exhaustive()
    }
}

fn relative_box(center: &DVector<f64>, pct: f64) -> (DVector<f64>, DVector<f64>) {
    let half = center.abs() * pct;
    (center - &half, center + &half)
}

/// Largest worst-case shortfall of `Y_b theta_b` over the box, relative to the
/// true determinant, along the sampled points. Positive means every sample
/// keeps at least `margin` of the true value with the true sign.
fn det_headroom(y_bs: &[(DMatrix<f64>, f64)], lo: &DVector<f64>, hi: &DVector<f64>, margin: f64) -> f64 {
    y_bs.iter()
        .map(|(y, t)| {
            let sign = t.signum();
            let worst: f64 = (0..lo.len())
                .map(|j| (sign * y[(0, j)] * lo[j]).min(sign * y[(0, j)] * hi[j]))
                .sum();
            worst / t.abs() - margin
        })
        .fold(f64::INFINITY, f64::min)
}

/// Samples of the desired path (plus the initial position) checked for
/// workspace membership and kinematic regularity.
pub fn sample_path(sc: &Scenario, plant: &dyn RobotModel) -> Result<Vec<DVector<f64>>> {
    let mut points = vec![DVector::from_column_slice(&sc.x0)];
    for i in 0..PATH_SAMPLES {
        let t = sc.duration * i as f64 / (PATH_SAMPLES - 1) as f64;
        let xd = sc.trajectory.evaluate(t).xd;
        if !plant.workspace().contains(&xd) {
            return Err(Error::InvalidScenario(format!(
                "desired path leaves the workspace at t = {t:.3} s ({:?})",
                xd.as_slice()
            )));
        }
        points.push(xd);
    }
    for x in &points {
        plant.check_configuration(x)?;
        let t = (plant.determinant_regressor(x)? * plant.parameters().theta_b)[0];
        if t.abs() <= EPS_DET {
            return Err(Error::Singular(format!("determinant {t:.3e} on the desired path")));
        }
    }
    Ok(points)
}

/// Builds plant, nominal model, estimate box and initial estimates.
///
/// Nominal physical parameters come from a seeded perturbation of the true
/// ones. Adjugate and determinant blocks start at the nominal values, clipped
/// into a box of relative half-width `bound_pct` about the true values; the
/// determinant box is shrunk further if needed so the estimated determinant
/// keeps `det_margin` of the true one along the path. The two product blocks
/// start at zero and their targets are the products of the initial errors.
pub fn prepare(sc: &Scenario) -> Result<Prepared> {
    sc.validate()?;
    let plant = sc.robot.build()?;
    let nominal_spec = sc.robot.perturbed(sc.perturbation_pct, sc.seed)?;
    let nominal = nominal_spec.build()?;
    let dims = plant.dims();
    let layout = ThetaLayout::new(dims);
    let gains = sc.gains.build(dims.n, layout.len());
    gains.validate()?;

    let points = sample_path(sc, plant.as_ref())?;
    let truth = plant.parameters();
    let nom = nominal.parameters();
    let bp = sc.bound_pct;

    let (lo_a, hi_a) = relative_box(&truth.theta_a, bp);
    let y_bs = points
        .iter()
        .map(|x| {
            let y = plant.determinant_regressor(x)?;
            let t = (&y * &truth.theta_b)[0];
            Ok((y, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut det_pct = bp;
    let (mut lo_b, mut hi_b) = relative_box(&truth.theta_b, det_pct);
    if det_headroom(&y_bs, &lo_b, &hi_b, sc.det_margin) < 0.0 {
        let (mut ok, mut bad) = (0.0, bp);
        for _ in 0..60 {
            let mid = 0.5 * (ok + bad);
            let (l, h) = relative_box(&truth.theta_b, mid);
            if det_headroom(&y_bs, &l, &h, sc.det_margin) >= 0.0 {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        det_pct = ok;
        (lo_b, hi_b) = relative_box(&truth.theta_b, det_pct);
    }

    let mut a0 = nom.theta_a.clone();
    controller::clamp_into(&mut a0, &lo_a, &hi_a);
    let mut b0 = nom.theta_b.clone();
    controller::clamp_into(&mut b0, &lo_b, &hi_b);

    let kin_err = &nom.theta_kin - &truth.theta_kin;
    let c_err = &nom.theta_c - &truth.theta_c;
    let a_err = &a0 - &truth.theta_a;
    let b_err = &b0 - &truth.theta_b;
    let eta_target = -theta_eta(&kin_err, &a_err);
    let mu_target = -theta_mu(&c_err, &b_err);

    let kin_half = DMatrix::from_fn(kin_err.nrows(), kin_err.ncols(), |i, j| {
        (bp * truth.theta_kin[(i, j)].abs()).max(kin_err[(i, j)].abs())
    });
    let eta_half = theta_eta(&kin_half, &(truth.theta_a.abs() * bp));
    let c_half = DVector::from_fn(c_err.len(), |i, _| (bp * truth.theta_c[i].abs()).max(c_err[i].abs()));
    let mu_half = theta_mu(&c_half, &(truth.theta_b.abs() * det_pct));

    let zeros_eta = DVector::zeros(eta_target.len());
    let zeros_mu = DVector::zeros(mu_target.len());
    let theta0 = layout.concat(&a0, &zeros_eta, &zeros_mu, &b0);
    let lower = layout.concat(&lo_a, &(-&eta_half), &(-&mu_half), &lo_b);
    let upper = layout.concat(&hi_a, &eta_half, &mu_half, &hi_b);
    let target = layout.concat(&truth.theta_a, &eta_target, &mu_target, &truth.theta_b);
    let adaptive = AdaptiveState::new(theta0, lower, upper, layout.clone())?;
    if !adaptive.contains(&target) {
        return Err(Error::InvalidScenario("true parameters fall outside the adaptation box".into()));
    }

    let x0 = DVector::from_column_slice(&sc.x0);
    let v0 = sc.v0.as_ref().map_or_else(|| DVector::zeros(dims.n), |v| DVector::from_column_slice(v));
    Ok(Prepared {
        plant,
        nominal,
        nominal_spec,
        layout,
        gains,
        fixed: FixedEstimates { theta_kin: nom.theta_kin, theta_c: nom.theta_c },
        adaptive,
        target,
        det_bound_pct: det_pct,
        kin_error: kin_err,
        c_error: c_err,
        initial: TaskState::new(x0, v0),
    })
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub xd: Vec<f64>,
    pub e: Vec<f64>,
    pub s: Vec<f64>,
    pub tau: Vec<f64>,
    pub v: f64,
    pub t_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<LogRow>,
    /// `S^T K S` per row, for the dissipation check.
    pub sks: Vec<f64>,
    /// Per row, `dV/dt` predicted from the closed-loop error equation. It
    /// differs from `-S^T K S` by the projection terms and by the drift of
    /// the true product errors away from their frozen targets.
    pub vdot_model: Vec<f64>,
    /// Per row, max-norm gap between the product-block errors implied by the
    /// current adjugate/determinant estimates and the ones used in `V`.
    pub product_drift: Vec<f64>,
    pub theta_final: Vec<f64>,
    /// Largest distance of any estimate outside its box over the run.
    pub max_bound_violation: f64,
    /// Number of element clamps applied after integration steps.
    pub clamp_events: usize,
}

struct Stage {
    deriv: DVector<f64>,
    y_f: Option<DMatrix<f64>>,
    raw_rate: DVector<f64>,
    tau: DVector<f64>,
    sliding: Sliding,
    t_hat: f64,
}

struct Runner<'a> {
    sc: &'a Scenario,
    prep: &'a Prepared,
    n: usize,
    q: usize,
}

impl Runner<'_> {
    fn split(&self, z: &DVector<f64>) -> (TaskState, DVector<f64>) {
        let n = self.n;
        let s = TaskState::new(z.rows(0, n).into_owned(), z.rows(n, n).into_owned());
        (s, z.rows(2 * n, self.q).into_owned())
    }

    fn stage(&self, t: f64, z: &DVector<f64>, noise: &DVector<f64>) -> Result<Stage> {
        let (s, theta) = self.split(z);
        let plant = self.prep.plant.as_ref();
        let measured = TaskState::new(&s.x + noise, s.xdot.clone());
        let r: Reference = self.sc.trajectory.evaluate(t);
        let (tau, sliding, t_hat, rate, raw_rate, y_f) = match self.sc.controller {
            ControllerKind::Adaptive => {
                let out = controller::adaptive_control(
                    plant,
                    &measured,
                    &r,
                    &self.prep.gains,
                    &self.prep.fixed,
                    &theta,
                    &self.prep.layout,
                )?;
                let rate = controller::adaptation_rate(
                    &out.y_f,
                    &out.control.sliding.s,
                    &self.prep.gains.lambda,
                    &theta,
                    &self.prep.adaptive.lower,
                    &self.prep.adaptive.upper,
                );
                let raw = controller::raw_adaptation_rate(&out.y_f, &out.control.sliding.s, &self.prep.gains.lambda);
                (out.control.tau, out.control.sliding, out.control.t_hat, rate, raw, Some(out.y_f))
            }
            ControllerKind::Baseline => {
                let lengths = plant.link_lengths(&s.x)?;
                let out = controller::baseline_control(
                    self.prep.nominal.as_ref(),
                    &lengths,
                    &measured,
                    &r,
                    &self.prep.gains,
                )?;
                (out.tau, out.sliding, out.t_hat, DVector::zeros(self.q), DVector::zeros(self.q), None)
            }
        };
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("actuator force".into()));
        }
        let acc = forward_acceleration(plant, &s, &tau)?;
        let mut deriv = DVector::zeros(z.len());
        deriv.rows_mut(0, self.n).copy_from(&s.xdot);
        deriv.rows_mut(self.n, self.n).copy_from(&acc);
        deriv.rows_mut(2 * self.n, self.q).copy_from(&rate);
        Ok(Stage { deriv, y_f, raw_rate, tau, sliding, t_hat })
    }

    /// Product-block errors implied by the current estimates, laid out as a
    /// full-length vector with the adjugate and determinant blocks copied.
    fn implied_tilde(&self, tilde: &DVector<f64>) -> DVector<f64> {
        let layout = &self.prep.layout;
        let a_err = tilde.rows_range(layout.a()).into_owned();
        let b_err = tilde.rows_range(layout.b()).into_owned();
        let eta = theta_eta(&self.prep.kin_error, &a_err);
        let mu = theta_mu(&self.prep.c_error, &b_err);
        layout.concat(&a_err, &eta, &mu, &b_err)
    }

    fn row(&self, t: f64, z: &DVector<f64>, st: &Stage) -> Result<(LogRow, (f64, f64, f64))> {
        let (s, theta) = self.split(z);
        let m = self.prep.plant.inertia(&s.x)?;
        let tilde = &theta - &self.prep.target;
        let lambda = &self.prep.gains.lambda;
        let v = controller::lyapunov_value(&st.sliding.s, &m, &tilde, lambda);
        let sks = st.sliding.s.dot(&(&self.prep.gains.k * &st.sliding.s));
        let (vdot, drift) = match &st.y_f {
            Some(y_f) => {
                let implied = self.implied_tilde(&tilde);
                let gap = &implied - &tilde;
                let rate = st.deriv.rows(2 * self.n, self.q);
                let proj: f64 = (0..self.q)
                    .map(|i| lambda[i] * tilde[i] * (rate[i] - st.raw_rate[i]))
                    .sum();
                (-sks + st.sliding.s.dot(&(y_f * &gap)) + proj, gap.amax())
            }
            None => (f64::NAN, 0.0),
        };
        let xd = (&s.x - &st.sliding.err).iter().copied().collect();
        let row = LogRow {
            t,
            x: s.x.iter().copied().collect(),
            xd,
            e: st.sliding.err.iter().copied().collect(),
            s: st.sliding.s.iter().copied().collect(),
            tau: st.tau.iter().copied().collect(),
            v,
            t_hat: st.t_hat,
        };
        Ok((row, (sks, vdot, drift)))
    }
}

/// Runs a scenario that has already been prepared.
pub fn run_prepared(sc: &Scenario, prep: &Prepared) -> Result<SimLog> {
    let dims = prep.plant.dims();
    let (n, q) = (dims.n, prep.layout.len());
    let runner = Runner { sc, prep, n, q };
    let steps = sc.steps();
    let dt = sc.dt;

    let mut z = DVector::zeros(2 * n + q);
    z.rows_mut(0, n).copy_from(&prep.initial.x);
    z.rows_mut(n, n).copy_from(&prep.initial.xdot);
    z.rows_mut(2 * n, q).copy_from(&prep.adaptive.theta_hat);

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x006e_6f69_7365);
    let normal = Normal::new(0.0, sc.noise_std.max(0.0)).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    let mut draw_noise = || -> DVector<f64> {
        if sc.noise_std > 0.0 {
            DVector::from_fn(n, |_, _| normal.sample(&mut rng))
        } else {
            DVector::zeros(n)
        }
    };

    let mut rows = Vec::with_capacity(steps + 1);
    let mut sks = Vec::with_capacity(steps + 1);
    let mut vdot_model = Vec::with_capacity(steps + 1);
    let mut product_drift = Vec::with_capacity(steps + 1);
    let mut max_violation: f64 = 0.0;
    let mut clamp_events = 0;
    let fault = |t: f64| move |e: Error| Error::Fault { t, source: Box::new(e) };

    for i in 0..=steps {
        let t = i as f64 * dt;
        let noise = draw_noise();
        let k1 = runner.stage(t, &z, &noise).map_err(fault(t))?;
        let (row, (sk, vdot, drift)) = runner.row(t, &z, &k1).map_err(fault(t))?;
        rows.push(row);
        sks.push(sk);
        vdot_model.push(vdot);
        product_drift.push(drift);
        if i == steps {
            break;
        }
        let h2 = 0.5 * dt;
        let k2 = runner.stage(t + h2, &(&z + &k1.deriv * h2), &noise).map_err(fault(t))?;
        let k3 = runner.stage(t + h2, &(&z + &k2.deriv * h2), &noise).map_err(fault(t))?;
        let k4 = runner.stage(t + dt, &(&z + &k3.deriv * dt), &noise).map_err(fault(t))?;
        z += (k1.deriv + k2.deriv * 2.0 + k3.deriv * 2.0 + k4.deriv) * (dt / 6.0);

        let mut theta = z.rows_mut(2 * n, q);
        for j in 0..q {
            let (lo, hi) = (prep.adaptive.lower[j], prep.adaptive.upper[j]);
            let v = theta[j];
            if v < lo || v > hi {
                clamp_events += 1;
                theta[j] = v.clamp(lo, hi);
            }
        }
        for j in 0..q {
            let v = theta[j];
            let out = (prep.adaptive.lower[j] - v).max(v - prep.adaptive.upper[j]).max(0.0);
            max_violation = max_violation.max(out);
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(fault(t + dt)(Error::NonFinite("integrated state".into())));
        }
    }

    Ok(SimLog {
        n,
        m: dims.m,
        rows,
        sks,
        vdot_model,
        product_drift,
        theta_final: z.rows(2 * n, q).iter().copied().collect(),
        max_bound_violation: max_violation,
        clamp_events,
    })
}

pub fn run_scenario(sc: &Scenario) -> Result<SimLog> {
    let prep = prepare(sc)?;
    run_prepared(sc, &prep)
}

/// Adaptive and baseline runs sharing one plant, nominal model, and seed.
pub fn run_comparison(sc: &Scenario) -> Result<(SimLog, SimLog)> {
    let prep = prepare(sc)?;
    let adaptive = Scenario { controller: ControllerKind::Adaptive, ..sc.clone() };
    let baseline = Scenario { controller: ControllerKind::Baseline, ..sc.clone() };
    Ok((run_prepared(&adaptive, &prep)?, run_prepared(&baseline, &prep)?))
}
