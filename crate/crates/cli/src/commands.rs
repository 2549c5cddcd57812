//! Command execution: resolve inputs (file or preset), run the library,
//! persist artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use reeblab::entropy::{self, EntropyEstimate};
use reeblab::fixtures;
use reeblab::flow::{self, FieldKind, FlowConfig, FlowRun, Integral};
use reeblab::geodesic::{self, ConformalMetric};
use reeblab::geometry::{self, BodySpec, Halfspace, SmoothingScheme, Surface};
use reeblab::{sampling, Vec4};

use crate::config::{pick, pick_required, RunConfig};
use crate::output::{Artifact, Sink};
use crate::{BodyCmd, CliError, EntropyCmd, FlowArgs, FlowCmd, OutArgs};

/// Plain-array point for clap; converted to `Vec4` at use sites.
pub type Point = [f64; 4];

pub fn parse_point(s: &str) -> Result<Point, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected four comma-separated coordinates".to_string());
    }
    let mut out = [0.0; 4];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad coordinate `{part}`: {e}"))?;
    }
    Ok(out)
}

fn read_input(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {path}: {e}")))
}

/// A string names either an existing file or a preset; files win so presets
/// never shadow the user's data.
fn load_body(spec: &str) -> Result<BodySpec, CliError> {
    if Path::new(spec).is_file() {
        return Ok(geometry::body_from_str(&read_input(spec)?)?);
    }
    fixtures::preset_body(spec)
        .ok_or_else(|| CliError::config(format!("`{spec}` is neither a file nor a body preset")))
}

fn load_surface(spec: &str) -> Result<Surface, CliError> {
    if Path::new(spec).is_file() {
        return Ok(geometry::surface_from_str(&read_input(spec)?)?);
    }
    fixtures::preset_surface(spec)
        .ok_or_else(|| CliError::config(format!("`{spec}` is neither a file nor a surface preset")))
}

fn load_metric(spec: &str) -> Result<ConformalMetric, CliError> {
    if Path::new(spec).is_file() {
        return Ok(geodesic::metric_from_str(&read_input(spec)?)?);
    }
    fixtures::preset_metric(spec)
        .ok_or_else(|| CliError::config(format!("`{spec}` is neither a file nor a metric preset")))
}

/// Halfspace lists come from polytope surface documents or the `cube` preset.
fn load_halfspaces(spec: &str) -> Result<Vec<Halfspace>, CliError> {
    if spec == "cube" || spec == "cube_limit" {
        return Ok(Halfspace::cube());
    }
    match load_surface(spec)? {
        Surface::Polytope(hs) => Ok(hs),
        Surface::Body(_) => Err(CliError::config(format!(
            "`{spec}` is a smooth body; smoothing schedules need a halfspace list"
        ))),
    }
}

fn parse_scheme(s: &str) -> Result<SmoothingScheme, CliError> {
    match s {
        "pnorm" => Ok(SmoothingScheme::PNorm),
        "log_sum_exp" => Ok(SmoothingScheme::LogSumExp),
        other => Err(CliError::config(format!(
            "unknown scheme `{other}` (expected pnorm or log_sum_exp)"
        ))),
    }
}

fn parse_field(s: &str) -> Result<FieldKind, CliError> {
    match s {
        "reeb" => Ok(FieldKind::Reeb),
        "hamiltonian" => Ok(FieldKind::Hamiltonian),
        other => Err(CliError::config(format!(
            "unknown field `{other}` (expected reeb or hamiltonian)"
        ))),
    }
}

fn base_config(args: &OutArgs, command: &str) -> Result<RunConfig, CliError> {
    match &args.config {
        Some(path) => RunConfig::load(path, command),
        None => Ok(RunConfig::new(command)),
    }
}

fn finish<T: Serialize>(
    args: &OutArgs,
    default_stem: &str,
    cfg: RunConfig,
    report: T,
    csv: Option<(String, &[(usize, &str)])>,
) -> Result<(), CliError> {
    let stem = args.out.clone().unwrap_or_else(|| default_stem.to_string());
    let mut sink = Sink::new(&args.out_dir, &stem)?;
    let json_path = sink.write_json(&Artifact::new(cfg, report))?;
    if let Some((contents, plot_columns)) = csv {
        sink.write_csv(&contents)?;
        if args.plot {
            sink.write_plot_script(plot_columns)?;
        }
    }
    sink.write_meta()?;
    println!("{}", json_path.display());
    Ok(())
}

// ---------------------------------------------------------------- body --

pub fn run_body(cmd: BodyCmd) -> Result<(), CliError> {
    match cmd {
        BodyCmd::Build { cube_p, preset, polytope, scheme, sharpness, out } => {
            let mut cfg = base_config(&out, "body build")?;
            cfg.cube_p = cube_p.or(cfg.cube_p);
            cfg.preset = preset.or(cfg.preset.take());
            cfg.polytope = polytope.or(cfg.polytope.take());
            cfg.scheme = scheme.or(cfg.scheme.take());
            cfg.sharpness = sharpness.or(cfg.sharpness);

            let sources =
                [cfg.cube_p.is_some(), cfg.preset.is_some(), cfg.polytope.is_some()];
            if sources.iter().filter(|s| **s).count() != 1 {
                return Err(CliError::config(
                    "give exactly one of --cube-p, --preset, --polytope",
                ));
            }
            let (body, stem) = if let Some(p) = cfg.cube_p {
                (BodySpec::pnorm_cube(p)?, format!("cube_p{p}"))
            } else if let Some(name) = &cfg.preset {
                (
                    fixtures::preset_body(name)
                        .ok_or_else(|| CliError::config(format!("unknown preset `{name}`")))?,
                    name.clone(),
                )
            } else {
                let hs = load_halfspaces(cfg.polytope.as_ref().unwrap())?;
                let scheme =
                    parse_scheme(&pick_required(None, cfg.scheme.clone(), "scheme")?)?;
                let sharpness = pick_required(None, cfg.sharpness, "sharpness")?;
                (BodySpec::smoothed_polytope(hs, scheme, sharpness)?, "smoothed".to_string())
            };

            // The body document itself is the artifact, reusable as input
            // anywhere a body path is accepted; the config echo lives in the
            // meta sidecar's neighbors rather than inside the document.
            let stem = out.out.clone().unwrap_or(stem);
            let mut sink = Sink::new(&out.out_dir, &stem)?;
            let path = sink.write_json(&geometry::body_to_json(&body))?;
            sink.write_meta()?;
            println!("{}", path.display());
            Ok(())
        }
        BodyCmd::Distance { a, b, kind, resolution, out } => {
            let mut cfg = base_config(&out, "body distance")?;
            cfg.a = a.or(cfg.a.take());
            cfg.b = b.or(cfg.b.take());
            cfg.kind = Some(pick(kind, cfg.kind.take(), "c0".to_string()));
            cfg.resolution = Some(pick(resolution, cfg.resolution, 100_000));

            let a = pick_required(None, cfg.a.clone(), "a")?;
            let b = pick_required(None, cfg.b.clone(), "b")?;
            let resolution = cfg.resolution.unwrap();
            let report: Value = match cfg.kind.as_deref().unwrap() {
                "c0" => {
                    let r = geometry::c0_distance(&load_surface(&a)?, &load_surface(&b)?, resolution)?;
                    serde_json::to_value(r).expect("serializable")
                }
                "c1" => {
                    let (Surface::Body(ba), Surface::Body(bb)) =
                        (load_surface(&a)?, load_surface(&b)?)
                    else {
                        return Err(CliError::config(
                            "c1 distance needs smooth bodies on both sides",
                        ));
                    };
                    let r = geometry::c1_distance_convex(&ba, &bb, resolution)?;
                    serde_json::to_value(r).expect("serializable")
                }
                other => {
                    return Err(CliError::config(format!(
                        "unknown distance kind `{other}` (expected c0 or c1)"
                    )))
                }
            };
            finish(&out, "distance", cfg, report, None)
        }
        BodyCmd::Check { body, samples, out } => {
            let mut cfg = base_config(&out, "body check")?;
            cfg.body = body.or(cfg.body.take());
            cfg.samples = Some(pick(samples, cfg.samples, 4096));

            let spec = pick_required(None, cfg.body.clone(), "body")?;
            let report = geometry::check_body(&load_body(&spec)?, cfg.samples.unwrap())?;
            finish(&out, "check", cfg, report, None)
        }
    }
}

// ---------------------------------------------------------------- flow --

/// JSON summary next to a run's CSV.
#[derive(Serialize)]
struct FlowSummary {
    field: FieldKind,
    horizon: f64,
    start: [f64; 4],
    final_state: [f64; 4],
    /// |final - start|: near zero on closed orbits.
    return_distance: f64,
    /// Reeb-clock reading at the end (equals horizon on Reeb runs).
    final_reeb_time: f64,
    max_g_drift: f64,
    monitor_names: Vec<String>,
    max_monitor_drift: Vec<f64>,
    accepted_steps: u64,
    rejected_steps: u64,
    rows: usize,
    total_log_stretch: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stretch_rate: Option<f64>,
}

fn summarize(run: &FlowRun, start: &Vec4, horizon: f64, stretch_rate: Option<f64>) -> FlowSummary {
    FlowSummary {
        field: run.field,
        horizon,
        start: (*start).into(),
        final_state: run.final_state.into(),
        return_distance: (run.final_state - start).norm(),
        final_reeb_time: run.samples.last().map_or(0.0, |s| s.reeb_time),
        max_g_drift: run.max_g_drift,
        monitor_names: run.monitor_names.clone(),
        max_monitor_drift: run.max_monitor_drift.clone(),
        accepted_steps: run.accepted_steps,
        rejected_steps: run.rejected_steps,
        rows: run.samples.len(),
        total_log_stretch: run.total_log_stretch,
        stretch_rate,
    }
}

/// Cube bodies get their two plane-power integrals watched automatically.
fn default_monitors(body: &BodySpec) -> Vec<Integral> {
    match body {
        BodySpec::PNormCube { p } => flow::plane_power_monitors(*p),
        _ => Vec::new(),
    }
}

struct ResolvedFlow {
    body: BodySpec,
    field: FieldKind,
    start: Vec4,
    tangent: Vec4,
    config: FlowConfig,
    cfg: RunConfig,
}

fn resolve_flow(args: &FlowArgs, command: &str) -> Result<ResolvedFlow, CliError> {
    let mut cfg = base_config(&args.out, command)?;
    cfg.body = args.body.clone().or(cfg.body.take());
    cfg.field = Some(pick(args.field.clone(), cfg.field.take(), "reeb".to_string()));
    cfg.horizon = args.horizon.or(cfg.horizon);
    cfg.seed = Some(pick(args.seed, cfg.seed, 0));
    cfg.start = args.start.or(cfg.start);
    let defaults = FlowConfig::default();
    cfg.sample_interval =
        Some(pick(args.sample_interval, cfg.sample_interval, defaults.sample_interval));
    cfg.rtol = Some(pick(args.rtol, cfg.rtol, defaults.rtol));
    cfg.atol = Some(pick(args.atol, cfg.atol, defaults.atol));
    cfg.renorm_interval =
        Some(pick(args.renorm_interval, cfg.renorm_interval, defaults.renorm_interval));

    let body = load_body(&pick_required(None, cfg.body.clone(), "body")?)?;
    let field = parse_field(cfg.field.as_deref().unwrap())?;
    let seed = cfg.seed.unwrap();
    let config = FlowConfig {
        horizon: pick_required(None, cfg.horizon, "T")?,
        sample_interval: cfg.sample_interval.unwrap(),
        rtol: cfg.rtol.unwrap(),
        atol: cfg.atol.unwrap(),
        renorm_interval: cfg.renorm_interval.unwrap(),
        seed,
        ..defaults
    };

    // Explicit starts are pulled onto {G = 1}; seeded starts are drawn
    // uniform-in-direction like the estimators do.
    let mut rng = sampling::rng(seed);
    let u = sampling::unit_direction(&mut rng);
    let start = match cfg.start {
        Some(p) => flow::project_to_level(&body, &Vec4::from(p))?,
        None => geometry::surface_point(&body, &u)?,
    };
    let tangent = sampling::unit_tangent(&mut rng, &body.gradient(&start)?);
    Ok(ResolvedFlow { body, field, start, tangent, config, cfg })
}

const FLOW_PLOT: &[(usize, &str)] = &[(2, "x1"), (3, "y1"), (4, "x2"), (5, "y2")];

pub fn run_flow(cmd: FlowCmd) -> Result<(), CliError> {
    match cmd {
        FlowCmd::Integrate(args) => {
            let r = resolve_flow(&args, "flow integrate")?;
            let monitors = default_monitors(&r.body);
            let run = flow::integrate_flow(&r.body, r.field, &r.start, &r.config, &monitors)?;
            let summary = summarize(&run, &r.start, r.config.horizon, None);
            finish(&args.out, "flow", r.cfg, summary, Some((flow::run_to_csv(&run), FLOW_PLOT)))
        }
        FlowCmd::Reparametrize(args) => {
            let r = resolve_flow(&args, "flow reparametrize")?;
            if r.field != FieldKind::Hamiltonian {
                return Err(CliError::config(
                    "reparametrization starts from a hamiltonian run; pass --field hamiltonian",
                ));
            }
            let monitors = default_monitors(&r.body);
            let run = flow::integrate_flow(&r.body, r.field, &r.start, &r.config, &monitors)?;
            let run = flow::reparametrize(&run, &r.body)?;
            let summary = summarize(&run, &r.start, r.config.horizon, None);
            finish(
                &args.out,
                "reparametrized",
                r.cfg,
                summary,
                Some((flow::run_to_csv(&run), FLOW_PLOT)),
            )
        }
        FlowCmd::Tangent(args) => {
            let r = resolve_flow(&args, "flow tangent")?;
            let run = flow::integrate_tangent_flow(&r.body, r.field, &r.start, &r.tangent, &r.config)?;
            let rate = (r.config.horizon > 0.0).then(|| run.total_log_stretch / r.config.horizon);
            let summary = summarize(&run, &r.start, r.config.horizon, rate);
            let plot: &[(usize, &str)] = &[(7, "log_stretch")];
            finish(&args.out, "tangent", r.cfg, summary, Some((flow::run_to_csv(&run), plot)))
        }
    }
}

// ------------------------------------------------------------- entropy --

/// Per-sample plot rows for a Lyapunov-style estimate, or the two separated
/// counts for the counting estimator.
fn estimate_csv(est: &EntropyEstimate) -> String {
    use std::fmt::Write as _;
    if est.per_sample.is_empty() {
        let mut out = String::from("time,separated_count\n");
        let _ = writeln!(out, "{:.16e},{}", 0.0, est.separated_initial.unwrap_or(0));
        let _ = writeln!(out, "{:.16e},{}", est.horizon, est.separated_final.unwrap_or(0));
        out
    } else {
        let mut out = String::from("sample,stretch_rate\n");
        for (i, v) in est.per_sample.iter().enumerate() {
            let _ = writeln!(out, "{i},{v:.16e}");
        }
        out
    }
}

/// Estimator runs keep only the endpoint sample unless asked otherwise.
fn estimator_config(horizon: f64, seed: u64) -> FlowConfig {
    FlowConfig {
        horizon,
        sample_interval: horizon.max(f64::MIN_POSITIVE),
        seed,
        ..FlowConfig::default()
    }
}

pub fn run_entropy(cmd: EntropyCmd) -> Result<(), CliError> {
    match cmd {
        EntropyCmd::Estimate {
            body,
            field,
            method,
            ensemble,
            horizon,
            seed,
            separation,
            segments,
            out,
        } => {
            let mut cfg = base_config(&out, "entropy estimate")?;
            cfg.body = body.or(cfg.body.take());
            cfg.field = Some(pick(field, cfg.field.take(), "reeb".to_string()));
            cfg.method = Some(pick(method, cfg.method.take(), "lyapunov".to_string()));
            cfg.ensemble = Some(pick(ensemble, cfg.ensemble, 10));
            cfg.horizon = Some(pick(horizon, cfg.horizon, 1000.0));
            cfg.seed = Some(pick(seed, cfg.seed, 0));

            let spec = pick_required(None, cfg.body.clone(), "body")?;
            let body = load_body(&spec)?;
            let field = parse_field(cfg.field.as_deref().unwrap())?;
            let config = estimator_config(cfg.horizon.unwrap(), cfg.seed.unwrap());
            let est = match cfg.method.as_deref().unwrap() {
                "lyapunov" => entropy::lyapunov_estimate(
                    &body,
                    field,
                    &config,
                    cfg.ensemble.unwrap(),
                    cfg.seed.unwrap(),
                )?,
                "separated" => {
                    cfg.separation = Some(pick(separation, cfg.separation, 0.05));
                    cfg.segments = Some(pick(segments, cfg.segments, 100));
                    entropy::separated_set_estimate(
                        &body,
                        field,
                        &config,
                        cfg.segments.unwrap(),
                        cfg.separation.unwrap(),
                        cfg.ensemble.unwrap(),
                        cfg.seed.unwrap(),
                    )?
                }
                other => {
                    return Err(CliError::config(format!(
                        "unknown method `{other}` (expected lyapunov or separated)"
                    )))
                }
            };
            let csv = estimate_csv(&est);
            finish(&out, "estimate", cfg, est, Some((csv, &[(2, "stretch_rate")])))
        }
        EntropyCmd::Sequence {
            polytope,
            scheme,
            schedule,
            body,
            members,
            field,
            ensemble,
            horizon,
            seed,
            out,
        } => {
            let mut cfg = base_config(&out, "entropy sequence")?;
            cfg.polytope = polytope.or(cfg.polytope.take());
            cfg.scheme = scheme.or(cfg.scheme.take());
            cfg.schedule = schedule.or(cfg.schedule.take());
            cfg.body = body.or(cfg.body.take());
            cfg.members = members.or(cfg.members);
            cfg.field = Some(pick(field, cfg.field.take(), "reeb".to_string()));
            cfg.ensemble = Some(pick(ensemble, cfg.ensemble, 10));
            cfg.horizon = Some(pick(horizon, cfg.horizon, 1000.0));
            cfg.seed = Some(pick(seed, cfg.seed, 0));

            if cfg.polytope.is_some() == cfg.body.is_some() {
                return Err(CliError::config(
                    "give either --polytope with a schedule, or an already-smooth --body",
                ));
            }
            let fieldkind = parse_field(cfg.field.as_deref().unwrap())?;
            let config = estimator_config(cfg.horizon.unwrap(), cfg.seed.unwrap());
            let report = if let Some(p) = &cfg.polytope {
                let hs = load_halfspaces(p)?;
                let scheme = parse_scheme(&pick_required(None, cfg.scheme.clone(), "scheme")?)?;
                let schedule = pick_required(None, cfg.schedule.clone(), "schedule")?;
                entropy::sequence_entropy(
                    &hs,
                    scheme,
                    &schedule,
                    fieldkind,
                    &config,
                    cfg.ensemble.unwrap(),
                    cfg.seed.unwrap(),
                )?
            } else {
                let body = load_body(cfg.body.as_ref().unwrap())?;
                let members = pick_required(None, cfg.members, "members")?;
                entropy::smooth_body_sequence(
                    &body,
                    members,
                    fieldkind,
                    &config,
                    cfg.ensemble.unwrap(),
                    cfg.seed.unwrap(),
                )?
            };
            let csv = entropy::sequence_to_csv(&report);
            finish(&out, "sequence", cfg, report, Some((csv, &[(3, "entropy_value")])))
        }
        EntropyCmd::Geodesic { metric, ensemble, horizon, seed, out } => {
            let mut cfg = base_config(&out, "entropy geodesic")?;
            cfg.metric = metric.or(cfg.metric.take());
            cfg.ensemble = Some(pick(ensemble, cfg.ensemble, 10));
            cfg.horizon = Some(pick(horizon, cfg.horizon, 1000.0));
            cfg.seed = Some(pick(seed, cfg.seed, 0));

            let spec = pick_required(None, cfg.metric.clone(), "metric")?;
            let metric = load_metric(&spec)?;
            let config = estimator_config(cfg.horizon.unwrap(), cfg.seed.unwrap());
            let est =
                geodesic::geodesic_entropy(&metric, &config, cfg.ensemble.unwrap(), cfg.seed.unwrap())?;
            let csv = estimate_csv(&est);
            finish(&out, "geodesic", cfg, est, Some((csv, &[(2, "stretch_rate")])))
        }
    }
}
