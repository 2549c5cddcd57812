//! Trajectory integration on starshaped level sets: plain Hamiltonian/Reeb
//! runs, tangent (variational) runs for stretch factors, and conversion of
//! Hamiltonian-time runs to Reeb time.
//!
//! Every run co-integrates a Reeb clock (d tau = lambda(X_G) dt along the
//! Hamiltonian field, d tau = dt along the Reeb field), so reparametrization
//! is exact to integrator tolerance instead of quadrature over samples.

use crate::contact;
use crate::error::{Error, Result};
use crate::geometry::BodySpec;
use crate::ode::{self, StepOptions};
use crate::Vec4;
use nalgebra::SVector;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Hamiltonian,
    Reeb,
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FieldKind::Hamiltonian => "hamiltonian",
            FieldKind::Reeb => "reeb",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Integration horizon in the chosen field's own time.
    pub horizon: f64,
    /// Tangent-flow renormalization spacing.
    pub renorm_interval: f64,
    /// Pull the state back to {G = 1} whenever |G - 1| exceeds this.
    pub projection_threshold: f64,
    /// Spacing of recorded trajectory samples.
    pub sample_interval: f64,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.25,
            horizon: 1.0,
            renorm_interval: 1.0,
            projection_threshold: 1e-9,
            sample_interval: 0.1,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn with_horizon(horizon: f64) -> Self {
        FlowConfig { horizon, ..FlowConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            (self.rtol, "relative tolerance"),
            (self.atol, "absolute tolerance"),
            (self.max_step, "max step"),
            (self.renorm_interval, "renormalization interval"),
            (self.projection_threshold, "projection threshold"),
            (self.sample_interval, "sample interval"),
        ];
        for (v, what) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::spec(format!("{what} must be positive and finite")));
            }
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::spec("horizon must be nonnegative and finite"));
        }
        Ok(())
    }
}

/// Scalar quantities watched along a run. Drift is reported as the maximum
/// absolute deviation from the starting value, measured before projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integral {
    /// |x_i|^p + |y_i|^p on symplectic plane i (1-based). Even p keeps the
    /// evaluation polynomial, hence smooth.
    PlanePower { plane: u8, p: u32 },
}

impl Integral {
    pub fn validate(&self) -> Result<()> {
        let Integral::PlanePower { plane, p } = self;
        if !(*plane == 1 || *plane == 2) {
            return Err(Error::spec("plane index must be 1 or 2"));
        }
        if *p < 2 || p % 2 != 0 {
            return Err(Error::spec("plane power must be an even integer >= 2"));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        let Integral::PlanePower { plane, p } = self;
        format!("F{plane}_{p}")
    }

    pub fn eval(&self, x: &Vec4) -> f64 {
        let Integral::PlanePower { plane, p } = self;
        let (a, b) = if *plane == 1 { (x[0], x[1]) } else { (x[2], x[3]) };
        a.powi(*p as i32) + b.powi(*p as i32)
    }
}

/// The two plane-power integrals conserved by the power-sum cube flows.
pub fn plane_power_monitors(p: u32) -> Vec<Integral> {
    vec![
        Integral::PlanePower { plane: 1, p },
        Integral::PlanePower { plane: 2, p },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    /// Time in the integrated field's parametrization.
    pub t: f64,
    /// Reeb-clock reading at this sample (equals t on Reeb runs).
    pub reeb_time: f64,
    /// State after projection (always within the projection threshold).
    pub state: Vec4,
    /// |G - 1| at this step before projection.
    pub g_drift: f64,
    /// Per-monitor |F(x(t)) - F(x(0))| before projection.
    pub monitor_drift: Vec<f64>,
    /// Cumulative tangent log-stretch; zero on plain runs.
    pub log_stretch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub field: FieldKind,
    pub monitor_names: Vec<String>,
    pub samples: Vec<FlowSample>,
    /// Worst |G - 1| seen at any accepted step before projection.
    pub max_g_drift: f64,
    pub max_monitor_drift: Vec<f64>,
    /// (time, log |v| accumulated since the previous renormalization),
    /// recorded at each renormalization and once more at the horizon.
    pub stretch_increments: Vec<(f64, f64)>,
    pub total_log_stretch: f64,
    /// Worst |<grad G, v>| / (|grad G| |v|) observed at monitored times.
    pub max_tangency_residual: f64,
    /// Set when the tangent start vector was zero (stretch undefined).
    pub degenerate_tangent: bool,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub final_state: Vec4,
    pub final_tangent: Option<Vec4>,
}

impl FlowRun {
    fn new(field: FieldKind, monitors: &[Integral], x0: Vec4, g_drift0: f64) -> Self {
        FlowRun {
            field,
            monitor_names: monitors.iter().map(Integral::name).collect(),
            samples: vec![FlowSample {
                t: 0.0,
                reeb_time: 0.0,
                state: x0,
                g_drift: g_drift0,
                monitor_drift: vec![0.0; monitors.len()],
                log_stretch: 0.0,
            }],
            max_g_drift: g_drift0,
            max_monitor_drift: vec![0.0; monitors.len()],
            stretch_increments: Vec::new(),
            total_log_stretch: 0.0,
            max_tangency_residual: 0.0,
            degenerate_tangent: false,
            accepted_steps: 0,
            rejected_steps: 0,
            final_state: x0,
            final_tangent: None,
        }
    }
}

/// Pulls a near-level point back onto {G = 1}: exact radial rescale when G is
/// homogeneous, one Newton step along grad G otherwise.
pub fn project_to_level(body: &BodySpec, x: &Vec4) -> Result<Vec4> {
    let g = body.value(x)?;
    match body.homogeneity() {
        Some(k) => Ok(x * g.powf(-1.0 / k)),
        None => {
            let grad = body.gradient(x)?;
            let n2 = grad.norm_squared();
            if n2 <= 1e-24 {
                return Err(Error::Degenerate {
                    point: format!("{:.6}, {:.6}, {:.6}, {:.6}", x[0], x[1], x[2], x[3]),
                    radial_derivative: grad.dot(x),
                });
            }
            Ok(x - grad * ((g - 1.0) / n2))
        }
    }
}

fn check_on_level(body: &BodySpec, x0: &Vec4) -> Result<f64> {
    let drift = (body.value(x0)? - 1.0).abs();
    if drift > 1e-8 {
        return Err(Error::Precondition(format!(
            "start point must lie on the unit level (|G - 1| = {drift:.3e})"
        )));
    }
    Ok(drift)
}

fn check_sample_times(times: &[f64], horizon: f64) -> Result<()> {
    let ordered = times.windows(2).all(|w| w[0] < w[1]);
    let in_range = times.iter().all(|&s| s > 0.0 && s <= horizon);
    if !ordered || !in_range {
        return Err(Error::Precondition(
            "sample times must be strictly increasing within (0, horizon]".to_string(),
        ));
    }
    Ok(())
}

/// Sample grid k * dt strictly inside (0, T) plus the horizon itself.
pub(crate) fn uniform_times(horizon: f64, dt: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let mut k = 1u64;
    loop {
        let s = k as f64 * dt;
        if s >= horizon - 1e-12 * horizon.max(1.0) {
            break;
        }
        times.push(s);
        k += 1;
    }
    if horizon > 0.0 {
        times.push(horizon);
    }
    times
}

fn step_options(config: &FlowConfig) -> StepOptions {
    StepOptions {
        rtol: config.rtol,
        atol: config.atol,
        h_max: config.max_step,
        h_init: None,
        max_steps: 50_000_000,
    }
}

fn state_part(y: &SVector<f64, 5>) -> Vec4 {
    Vec4::new(y[0], y[1], y[2], y[3])
}

fn dump_state(x: &Vec4) -> String {
    format!("[{:.17e}, {:.17e}, {:.17e}, {:.17e}]", x[0], x[1], x[2], x[3])
}

/// Integrates the chosen field from `x0` over `config.horizon`, recording
/// samples every `config.sample_interval` plus the endpoint.
pub fn integrate_flow(
    body: &BodySpec,
    field: FieldKind,
    x0: &Vec4,
    config: &FlowConfig,
    monitors: &[Integral],
) -> Result<FlowRun> {
    let times = uniform_times(config.horizon, config.sample_interval);
    integrate_flow_at(body, field, x0, config, monitors, &times)
}

/// As `integrate_flow`, but records samples at the caller's times (strictly
/// increasing, within (0, horizon]); each is hit exactly by the integrator.
pub fn integrate_flow_at(
    body: &BodySpec,
    field: FieldKind,
    x0: &Vec4,
    config: &FlowConfig,
    monitors: &[Integral],
    sample_times: &[f64],
) -> Result<FlowRun> {
    config.validate()?;
    body.validate()?;
    monitors.iter().try_for_each(Integral::validate)?;
    check_sample_times(sample_times, config.horizon)?;
    let g_drift0 = check_on_level(body, x0)?;

    let mut run = FlowRun::new(field, monitors, *x0, g_drift0);
    if config.horizon == 0.0 {
        return Ok(run);
    }

    let base: Vec<f64> = monitors.iter().map(|m| m.eval(x0)).collect();
    let rhs = |y: &SVector<f64, 5>| -> Result<SVector<f64, 5>> {
        let x = state_part(y);
        let (dx, dtau) = match field {
            FieldKind::Hamiltonian => (
                contact::hamiltonian_field(body, &x)?,
                contact::reeb_normalizer(body, &x)?,
            ),
            FieldKind::Reeb => (contact::reeb_field(body, &x)?, 1.0),
        };
        Ok(SVector::<f64, 5>::new(dx[0], dx[1], dx[2], dx[3], dtau))
    };

    let mut sample_idx = 0usize;
    let mut last_good = *x0;
    let mut samples = std::mem::take(&mut run.samples);
    let mut max_g = run.max_g_drift;
    let mut max_m = std::mem::take(&mut run.max_monitor_drift);

    let outcome = ode::integrate(
        rhs,
        0.0,
        SVector::<f64, 5>::new(x0[0], x0[1], x0[2], x0[3], 0.0),
        config.horizon,
        sample_times,
        &step_options(config),
        |t, y| {
            let mut x = state_part(y);
            let drift = (body.value(&x)? - 1.0).abs();
            max_g = max_g.max(drift);
            let m_drift: Vec<f64> = monitors
                .iter()
                .zip(&base)
                .map(|(m, b)| (m.eval(&x) - b).abs())
                .collect();
            for (acc, d) in max_m.iter_mut().zip(&m_drift) {
                *acc = acc.max(*d);
            }
            if drift > config.projection_threshold {
                x = project_to_level(body, &x)?;
                for i in 0..4 {
                    y[i] = x[i];
                }
            }
            last_good = x;
            if sample_times.get(sample_idx) == Some(&t) {
                sample_idx += 1;
                samples.push(FlowSample {
                    t,
                    reeb_time: match field {
                        FieldKind::Hamiltonian => y[4],
                        FieldKind::Reeb => t,
                    },
                    state: x,
                    g_drift: drift,
                    monitor_drift: m_drift,
                    log_stretch: 0.0,
                });
            }
            Ok(())
        },
    );

    run.samples = samples;
    run.max_g_drift = max_g;
    run.max_monitor_drift = max_m;
    let (y_end, stats) = outcome.map_err(|e| attach_last_state(e, &last_good))?;
    run.accepted_steps = stats.accepted;
    run.rejected_steps = stats.rejected;
    run.final_state = state_part(&y_end);
    Ok(run)
}

/// Converts a Hamiltonian-time run to Reeb time using the co-integrated
/// clock: sample times become the stored Reeb-clock readings, states are
/// untouched.
pub fn reparametrize(run: &FlowRun, body: &BodySpec) -> Result<FlowRun> {
    if run.field != FieldKind::Hamiltonian {
        return Err(Error::Precondition(
            "reparametrization expects a run of the Hamiltonian field".to_string(),
        ));
    }
    body.validate()?;
    for s in [run.samples.first(), run.samples.last()].into_iter().flatten() {
        let g = body.value(&s.state)?;
        if (g - 1.0).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "run does not lie on this body's unit level (|G - 1| = {:.3e})",
                (g - 1.0).abs()
            )));
        }
    }
    let mut out = run.clone();
    out.field = FieldKind::Reeb;
    for s in &mut out.samples {
        s.t = s.reeb_time;
    }
    Ok(out)
}

/// Integrates the coupled state + tangent system (x' = F(x), v' = DF(x) v),
/// renormalizing v to unit length every `renorm_interval` and recording the
/// log-stretch increments that Lyapunov estimates sum.
pub fn integrate_tangent_flow(
    body: &BodySpec,
    field: FieldKind,
    x0: &Vec4,
    v0: &Vec4,
    config: &FlowConfig,
) -> Result<FlowRun> {
    config.validate()?;
    body.validate()?;
    let g_drift0 = check_on_level(body, x0)?;
    let grad0 = body.gradient(x0)?;
    if grad0.dot(v0).abs() > 1e-10 * grad0.norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "start vector is not tangent to the level set (dG(v) = {:.3e})",
            grad0.dot(v0)
        )));
    }
    let degenerate = v0.norm() == 0.0;

    let sample_times = uniform_times(config.horizon, config.sample_interval);
    let mut renorm_times = Vec::new();
    if !degenerate {
        let mut k = 1u64;
        loop {
            let s = k as f64 * config.renorm_interval;
            if s >= config.horizon - 1e-12 * config.horizon.max(1.0) {
                break;
            }
            renorm_times.push(s);
            k += 1;
        }
    }
    let mut stops: Vec<f64> = sample_times
        .iter()
        .chain(renorm_times.iter())
        .copied()
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut run = FlowRun::new(field, &[], *x0, g_drift0);
    run.degenerate_tangent = degenerate;
    if config.horizon == 0.0 {
        run.final_tangent = Some(*v0);
        return Ok(run);
    }

    let rhs = |y: &SVector<f64, 9>| -> Result<SVector<f64, 9>> {
        let x = Vec4::new(y[0], y[1], y[2], y[3]);
        let v = Vec4::new(y[4], y[5], y[6], y[7]);
        let (dx, jac, dtau) = match field {
            FieldKind::Hamiltonian => (
                contact::hamiltonian_field(body, &x)?,
                contact::hamiltonian_jacobian(body, &x)?,
                contact::reeb_normalizer(body, &x)?,
            ),
            FieldKind::Reeb => (
                contact::reeb_field(body, &x)?,
                contact::reeb_jacobian(body, &x)?,
                1.0,
            ),
        };
        let dv = jac * v;
        Ok(SVector::<f64, 9>::from([
            dx[0], dx[1], dx[2], dx[3], dv[0], dv[1], dv[2], dv[3], dtau,
        ]))
    };

    let mut sample_idx = 0usize;
    let mut renorm_idx = 0usize;
    let mut accumulated = 0.0f64;
    let mut last_good = *x0;
    let mut samples = std::mem::take(&mut run.samples);
    let mut increments = Vec::new();
    let mut max_g = run.max_g_drift;
    let mut max_res = 0.0f64;

    let y0 = SVector::<f64, 9>::from([
        x0[0], x0[1], x0[2], x0[3], v0[0], v0[1], v0[2], v0[3], 0.0,
    ]);
    let outcome = ode::integrate(
        rhs,
        0.0,
        y0,
        config.horizon,
        &stops,
        &step_options(config),
        |t, y| {
            let mut x = Vec4::new(y[0], y[1], y[2], y[3]);
            let mut v = Vec4::new(y[4], y[5], y[6], y[7]);
            let drift = (body.value(&x)? - 1.0).abs();
            max_g = max_g.max(drift);
            if drift > config.projection_threshold {
                x = project_to_level(body, &x)?;
                for i in 0..4 {
                    y[i] = x[i];
                }
            }
            last_good = x;

            let is_sample = sample_times.get(sample_idx) == Some(&t);
            let is_renorm = renorm_times.get(renorm_idx) == Some(&t);
            if (is_sample || is_renorm) && !degenerate {
                let grad = body.gradient(&x)?;
                let vn = v.norm();
                if vn > 0.0 {
                    let res = grad.dot(&v).abs() / (grad.norm() * vn);
                    max_res = max_res.max(res);
                }
            }
            if is_sample {
                sample_idx += 1;
                let stretch = if degenerate { 0.0 } else { accumulated + v.norm().ln() };
                samples.push(FlowSample {
                    t,
                    reeb_time: match field {
                        FieldKind::Hamiltonian => y[8],
                        FieldKind::Reeb => t,
                    },
                    state: x,
                    g_drift: drift,
                    monitor_drift: Vec::new(),
                    log_stretch: stretch,
                });
            }
            if is_renorm {
                renorm_idx += 1;
                let inc = v.norm().ln();
                increments.push((t, inc));
                accumulated += inc;
                v /= v.norm();
                // Re-anchoring to the tangent plane stops the slow drift the
                // variational equation accumulates off the level set.
                let grad = body.gradient(&x)?;
                v -= grad * (grad.dot(&v) / grad.norm_squared());
                v /= v.norm();
                for i in 0..4 {
                    y[4 + i] = v[i];
                }
            }
            Ok(())
        },
    );

    run.samples = samples;
    run.max_g_drift = max_g;
    run.max_tangency_residual = max_res;
    let (y_end, stats) = outcome.map_err(|e| attach_last_state(e, &last_good))?;
    run.accepted_steps = stats.accepted;
    run.rejected_steps = stats.rejected;
    run.final_state = Vec4::new(y_end[0], y_end[1], y_end[2], y_end[3]);
    let v_end = Vec4::new(y_end[4], y_end[5], y_end[6], y_end[7]);
    if !degenerate {
        let tail = v_end.norm().ln();
        increments.push((config.horizon, tail));
        run.total_log_stretch = accumulated + tail;
    }
    run.stretch_increments = increments;
    run.final_tangent = Some(v_end);
    Ok(run)
}

fn attach_last_state(e: Error, last: &Vec4) -> Error {
    match e {
        Error::Integration { t, detail } => Error::Integration {
            t,
            detail: format!("{detail}; last good state {}", dump_state(last)),
        },
        other => other,
    }
}

/// CSV rows for a run: t, x1, y1, x2, y2, G_drift, one column per monitor,
/// log_stretch. Floats carry 17 significant digits so reruns are
/// byte-comparable and values roundtrip.
pub fn run_to_csv(run: &FlowRun) -> String {
    let mut out = String::new();
    out.push_str("t,x1,y1,x2,y2,G_drift");
    for name in &run.monitor_names {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",log_stretch\n");
    for s in &run.samples {
        let x = &s.state;
        let _ = write!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t, x[0], x[1], x[2], x[3], s.g_drift
        );
        for d in &s.monitor_drift {
            let _ = write!(out, ",{d:.16e}");
        }
        let _ = writeln!(out, ",{:.16e}", s.log_stretch);
    }
    out
}
