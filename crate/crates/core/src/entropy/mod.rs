//! Orbit-complexity estimators: largest-Lyapunov-exponent ensembles over
//! tangent flows, Bowen separated-set counting, and sweeps over smoothing
//! schedules with a tail-minimum summary.
//!
//! These are numerical proxies, not certificates: the Lyapunov value
//! indicates (does not prove) positive orbit complexity, and the separated
//! count lower-bounds growth only in the large-ensemble, long-horizon limit.

use crate::error::{Error, Result};
use crate::flow::{self, FieldKind, FlowConfig};
use crate::geometry::{self, surface_point, BodySpec, Halfspace, SmoothingScheme};
use crate::sampling;
use crate::Vec4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMethod {
    Lyapunov,
    SeparatedSet,
}

/// One entropy-proxy measurement. `value` is in nats per unit time of the
/// integrated field (Reeb time when the field is the Reeb field).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub method: EstimatorMethod,
    pub field: FieldKind,
    pub value: f64,
    /// Sample standard deviation / sqrt(count); needs at least two samples.
    pub stderr: Option<f64>,
    /// Requested ensemble size.
    pub ensemble: usize,
    /// Per-sample values for the Lyapunov method (empty for separated-set).
    pub per_sample: Vec<f64>,
    /// Samples dropped because their integration failed.
    pub excluded: usize,
    /// Set when more than 10% of the ensemble was excluded.
    pub unreliable: bool,
    pub seed: u64,
    pub horizon: f64,
    pub renorm_interval: Option<f64>,
    /// Separated-set parameters (ε, segment count) when applicable.
    pub separation: Option<f64>,
    pub segments: Option<usize>,
    /// Separated counts at time zero and at the horizon: the reported value
    /// is the baseline-subtracted growth rate [ln s(T) - ln s(0)] / T, so a
    /// statically well-spread ensemble does not read as entropy.
    pub separated_initial: Option<usize>,
    pub separated_final: Option<usize>,
    /// Initial points are uniform in direction, not Liouville-distributed;
    /// the discrepancy reweights the ensemble but cannot move a zero
    /// exponent off zero. Recorded here so reports carry the caveat.
    pub sampling_measure: String,
}

pub(crate) const SAMPLING_NOTE: &str =
    "uniform-in-direction on the level set; Liouville density correction recorded, not applied";

pub(crate) fn aggregate(mut per_sample: Vec<(usize, f64)>) -> (Vec<f64>, f64, Option<f64>) {
    // Fold in sample-index order so concurrency cannot reorder the result.
    per_sample.sort_by_key(|(i, _)| *i);
    let values: Vec<f64> = per_sample.into_iter().map(|(_, v)| v).collect();
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n >= 2 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some((var / n as f64).sqrt())
    } else {
        None
    };
    (values, mean, stderr)
}

pub(crate) fn excludable(e: &Error) -> bool {
    matches!(e, Error::Integration { .. } | Error::Degenerate { .. })
}

/// Draws a start point (uniform in direction) and a unit tangent vector at
/// it, both from the sample's derived stream.
fn sample_start(body: &BodySpec, root_seed: u64, index: u64) -> Result<(Vec4, Vec4)> {
    let mut rng = sampling::rng_for(root_seed, index);
    let u = sampling::unit_direction(&mut rng);
    let x0 = surface_point(body, &u)?;
    let grad = body.gradient(&x0)?;
    let v0 = sampling::unit_tangent(&mut rng, &grad);
    Ok((x0, v0))
}

/// Largest-Lyapunov ensemble: N tangent runs from independent derived seeds,
/// each contributing (total log-stretch) / horizon.
pub fn lyapunov_estimate(
    body: &BodySpec,
    field: FieldKind,
    config: &FlowConfig,
    ensemble: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if ensemble < 2 {
        return Err(Error::Precondition(
            "a Lyapunov ensemble needs at least two samples".to_string(),
        ));
    }
    config.validate()?;
    if config.horizon <= 0.0 {
        return Err(Error::Precondition(
            "a Lyapunov estimate needs a positive horizon".to_string(),
        ));
    }
    body.validate()?;

    let outcomes: Vec<(usize, Result<f64>)> = (0..ensemble)
        .into_par_iter()
        .map(|i| {
            let run = sample_start(body, seed, i as u64).and_then(|(x0, v0)| {
                flow::integrate_tangent_flow(body, field, &x0, &v0, config)
            });
            (i, run.map(|r| r.total_log_stretch / config.horizon))
        })
        .collect();

    let mut kept = Vec::with_capacity(ensemble);
    let mut excluded = 0usize;
    for (i, r) in outcomes {
        match r {
            Ok(v) => kept.push((i, v)),
            Err(e) if excludable(&e) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(Error::Integration {
            t: 0.0,
            detail: "every ensemble member failed to integrate".to_string(),
        });
    }
    let (per_sample, value, stderr) = aggregate(kept);
    Ok(EntropyEstimate {
        method: EstimatorMethod::Lyapunov,
        field,
        value,
        stderr,
        ensemble,
        per_sample,
        excluded,
        unreliable: 10 * excluded > ensemble,
        seed,
        horizon: config.horizon,
        renorm_interval: Some(config.renorm_interval),
        separation: None,
        segments: None,
        separated_initial: None,
        separated_final: None,
        sampling_measure: SAMPLING_NOTE.to_string(),
    })
}

/// Greedy maximal subset of `points` that is pairwise ε-separated in the
/// metric max_k |a_k - b_k| over the stored snapshots.
fn greedy_separated(points: &[Vec<Vec4>], upto: usize, eps: f64) -> usize {
    let mut kept: Vec<&Vec<Vec4>> = Vec::new();
    'outer: for orbit in points {
        for other in &kept {
            let mut apart = false;
            for k in 0..upto {
                if (orbit[k] - other[k]).norm() >= eps {
                    apart = true;
                    break;
                }
            }
            if !apart {
                continue 'outer;
            }
        }
        kept.push(orbit);
    }
    kept.len()
}

/// Bowen separated-set estimate: integrates an ensemble, snapshots each orbit
/// on an equispaced grid, and reports the baseline-subtracted growth rate
/// [ln s(T, ε) - ln s(0, ε)] / T of the maximal ε-separated count.
#[allow(clippy::too_many_arguments)]
pub fn separated_set_estimate(
    body: &BodySpec,
    field: FieldKind,
    config: &FlowConfig,
    segments: usize,
    separation: f64,
    ensemble: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if !(separation > 0.0) {
        return Err(Error::Precondition("separation radius must be positive".to_string()));
    }
    if segments < 2 {
        return Err(Error::Precondition("need at least two snapshot segments".to_string()));
    }
    if ensemble == 0 {
        return Err(Error::Precondition("ensemble must be non-empty".to_string()));
    }
    config.validate()?;
    let horizon = config.horizon;
    if !(horizon / segments as f64 > 1e-8) {
        return Err(Error::Precondition(
            "snapshot spacing is below the integrator's minimum step".to_string(),
        ));
    }
    body.validate()?;

    let times: Vec<f64> = (1..=segments)
        .map(|k| k as f64 * horizon / segments as f64)
        .collect();
    let outcomes: Vec<(usize, Result<Vec<Vec4>>)> = (0..ensemble)
        .into_par_iter()
        .map(|i| {
            let orbit = sample_start(body, seed, i as u64).and_then(|(x0, _)| {
                let run = flow::integrate_flow_at(body, field, &x0, config, &[], &times)?;
                Ok(run.samples.iter().map(|s| s.state).collect::<Vec<_>>())
            });
            (i, orbit)
        })
        .collect();

    let mut orbits: Vec<(usize, Vec<Vec4>)> = Vec::with_capacity(ensemble);
    let mut excluded = 0usize;
    for (i, r) in outcomes {
        match r {
            Ok(o) => orbits.push((i, o)),
            Err(e) if excludable(&e) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if orbits.is_empty() {
        return Err(Error::Integration {
            t: 0.0,
            detail: "every ensemble member failed to integrate".to_string(),
        });
    }
    orbits.sort_by_key(|(i, _)| *i);
    let snapshots: Vec<Vec<Vec4>> = orbits.into_iter().map(|(_, o)| o).collect();

    let s0 = greedy_separated(&snapshots, 1, separation);
    let s_t = greedy_separated(&snapshots, segments + 1, separation);
    let value = ((s_t as f64).ln() - (s0 as f64).ln()) / horizon;
    Ok(EntropyEstimate {
        method: EstimatorMethod::SeparatedSet,
        field,
        value,
        stderr: None,
        ensemble,
        per_sample: Vec::new(),
        excluded,
        unreliable: 10 * excluded > ensemble,
        seed,
        horizon,
        renorm_interval: None,
        separation: Some(separation),
        segments: Some(segments),
        separated_initial: Some(s0),
        separated_final: Some(s_t),
        sampling_measure: SAMPLING_NOTE.to_string(),
    })
}

/// Entropy sweep over a smoothing schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub schedule: Vec<f64>,
    pub estimates: Vec<EntropyEstimate>,
    /// Certified radial sup-distance of each member to the schedule's limit.
    pub c0_distances: Vec<f64>,
    /// Minimum over the last ⌈len/2⌉ members: a finite-schedule stand-in for
    /// the limit-inferior of the member entropies.
    pub tail_minimum: f64,
}

fn tail_minimum(estimates: &[EntropyEstimate]) -> f64 {
    let tail = estimates.len().div_ceil(2);
    estimates[estimates.len() - tail..]
        .iter()
        .map(|e| e.value)
        .fold(f64::INFINITY, f64::min)
}

/// Builds the smoothing family for the schedule and runs the Lyapunov
/// estimator on every member, with per-member derived seeds.
pub fn sequence_entropy(
    halfspaces: &[Halfspace],
    scheme: SmoothingScheme,
    schedule: &[f64],
    field: FieldKind,
    config: &FlowConfig,
    ensemble: usize,
    seed: u64,
) -> Result<SequenceReport> {
    let family = geometry::build_family(halfspaces, scheme, schedule)?;
    let mut estimates = Vec::with_capacity(family.members.len());
    for (i, member) in family.members.iter().enumerate() {
        let member_seed = sampling::derive_seed(seed, i as u64);
        estimates.push(lyapunov_estimate(member, field, config, ensemble, member_seed)?);
    }
    Ok(SequenceReport {
        schedule: family.sharpness,
        tail_minimum: tail_minimum(&estimates),
        estimates,
        c0_distances: family.limit_distance,
    })
}

/// Sequence sweep for a body that is already C³, whose smoothing sequence
/// is taken constant: the body repeats for every schedule slot, members
/// differing only through derived sample seeds. The per-member spread then
/// doubles as a stability check of the estimator itself, and the recorded
/// limit distances are the (measured) distance of the body to itself.
pub fn smooth_body_sequence(
    body: &BodySpec,
    members: usize,
    field: FieldKind,
    config: &FlowConfig,
    ensemble: usize,
    seed: u64,
) -> Result<SequenceReport> {
    if members == 0 {
        return Err(Error::Precondition(
            "a sequence needs at least one member".to_string(),
        ));
    }
    body.validate()?;
    let surface = geometry::Surface::Body(body.clone());
    let distance = geometry::c0_distance(&surface, &surface, 20_000)?.value;
    let mut estimates = Vec::with_capacity(members);
    for i in 0..members {
        let member_seed = sampling::derive_seed(seed, i as u64);
        estimates.push(lyapunov_estimate(body, field, config, ensemble, member_seed)?);
    }
    Ok(SequenceReport {
        schedule: (1..=members).map(|i| i as f64).collect(),
        tail_minimum: tail_minimum(&estimates),
        estimates,
        c0_distances: vec![distance; members],
    })
}

/// Plot rows for a sequence sweep: sharpness, c0_distance, entropy_value,
/// stderr (one line per member).
pub fn sequence_to_csv(report: &SequenceReport) -> String {
    let mut out = String::from("sharpness,c0_distance,entropy_value,stderr\n");
    for ((sharp, dist), est) in report
        .schedule
        .iter()
        .zip(&report.c0_distances)
        .zip(&report.estimates)
    {
        let _ = writeln!(
            out,
            "{sharp:.16e},{dist:.16e},{:.16e},{:.16e}",
            est.value,
            est.stderr.unwrap_or(f64::NAN)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(horizon: f64) -> FlowConfig {
        FlowConfig { horizon, sample_interval: horizon, ..FlowConfig::default() }
    }

    #[test]
    fn integrable_bodies_have_zero_exponent() {
        // Integrable shear makes |v| grow linearly, so the estimate decays
        // like ln(cT)/T: the 0.01 bar needs the full horizon, not a short one.
        for body in [
            BodySpec::pnorm_cube(2).unwrap(),
            BodySpec::pnorm_cube(8).unwrap(),
        ] {
            let est =
                lyapunov_estimate(&body, FieldKind::Reeb, &quick_config(1000.0), 4, 17).unwrap();
            assert!(est.value.abs() <= 0.01, "value {:.3e}", est.value);
            assert!(est.stderr.unwrap() <= 0.005, "stderr {:?}", est.stderr);
            assert_eq!(est.excluded, 0);
            assert!(!est.unreliable);
            assert_eq!(est.per_sample.len(), 4);
        }
    }

    #[test]
    fn ellipsoid_reeb_flow_has_zero_exponent() {
        let mut a = crate::Mat4::identity();
        a[(2, 2)] = 2.0;
        a[(3, 3)] = 2.0;
        let body = BodySpec::quadric(a).unwrap();
        let est = lyapunov_estimate(&body, FieldKind::Reeb, &quick_config(1000.0), 4, 5).unwrap();
        assert!(est.value.abs() <= 0.01, "value {:.3e}", est.value);
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let body = BodySpec::pnorm_cube(4).unwrap();
        let config = quick_config(20.0);
        let a = lyapunov_estimate(&body, FieldKind::Reeb, &config, 3, 9).unwrap();
        let b = lyapunov_estimate(&body, FieldKind::Reeb, &config, 3, 9).unwrap();
        let c = lyapunov_estimate(&body, FieldKind::Reeb, &config, 3, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.per_sample, c.per_sample);
    }

    #[test]
    fn tiny_ensembles_are_rejected() {
        let body = BodySpec::pnorm_cube(2).unwrap();
        assert!(matches!(
            lyapunov_estimate(&body, FieldKind::Reeb, &quick_config(1.0), 1, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn periodic_flow_shows_no_orbit_separation() {
        let body = BodySpec::pnorm_cube(2).unwrap();
        let config = quick_config(50.0);
        let est =
            separated_set_estimate(&body, FieldKind::Reeb, &config, 25, 0.1, 50, 3).unwrap();
        assert!(est.value <= 0.05, "value {:.3e}", est.value);
        assert!(est.separated_final.unwrap() >= est.separated_initial.unwrap());
    }

    #[test]
    fn oversized_separation_radius_counts_one() {
        let body = BodySpec::pnorm_cube(2).unwrap();
        let config = quick_config(5.0);
        let est =
            separated_set_estimate(&body, FieldKind::Reeb, &config, 5, 10.0, 20, 3).unwrap();
        assert_eq!(est.separated_final, Some(1));
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn singleton_ensemble_counts_one() {
        let body = BodySpec::pnorm_cube(2).unwrap();
        let config = quick_config(5.0);
        let est = separated_set_estimate(&body, FieldKind::Reeb, &config, 5, 0.1, 1, 3).unwrap();
        assert_eq!(est.separated_initial, Some(1));
        assert_eq!(est.separated_final, Some(1));
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn smoothed_cube_schedule_has_flat_tail() {
        let report = sequence_entropy(
            &Halfspace::cube(),
            SmoothingScheme::PNorm,
            &[4.0, 8.0],
            FieldKind::Reeb,
            &quick_config(1000.0),
            2,
            21,
        )
        .unwrap();
        assert_eq!(report.estimates.len(), 2);
        for est in &report.estimates {
            assert!(est.value.abs() <= 0.01, "member value {:.3e}", est.value);
        }
        assert!(report.tail_minimum <= 0.01);
        assert!(report.c0_distances[1] < report.c0_distances[0]);
    }

    #[test]
    fn single_member_schedule_tail_is_its_estimate() {
        let report = sequence_entropy(
            &Halfspace::cube(),
            SmoothingScheme::PNorm,
            &[4.0],
            FieldKind::Reeb,
            &quick_config(20.0),
            2,
            2,
        )
        .unwrap();
        assert_eq!(report.tail_minimum, report.estimates[0].value);
        let csv = sequence_to_csv(&report);
        assert_eq!(csv.lines().next().unwrap(), "sharpness,c0_distance,entropy_value,stderr");
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 4);
    }

    #[test]
    fn constant_family_of_a_smooth_body_is_stable() {
        // A perturbed ellipsoid is its own smoothing sequence; members then
        // differ only through sample seeds, so estimates must agree within
        // the usual two-standard-error band pairwise.
        let mut a = crate::Mat4::identity();
        a[(2, 2)] = 2.0;
        a[(3, 3)] = 2.0;
        let base = BodySpec::quadric(a).unwrap();
        let wobble = crate::geometry::TrigPolynomial::new(vec![crate::geometry::TrigTerm {
            coefficient: 0.05,
            frequency: [1, 1, 0, 0],
            phase: 0.0,
        }])
        .unwrap();
        let body = BodySpec::radial_graph(base, wobble).unwrap();
        let report =
            smooth_body_sequence(&body, 3, FieldKind::Reeb, &quick_config(150.0), 8, 31).unwrap();
        assert_eq!(report.schedule, vec![1.0, 2.0, 3.0]);
        assert!(report.c0_distances.iter().all(|d| *d <= 1e-12));
        for i in 0..report.estimates.len() {
            for j in i + 1..report.estimates.len() {
                let (a, b) = (&report.estimates[i], &report.estimates[j]);
                let gap = (a.value - b.value).abs();
                let band = 2.0 * (a.stderr.unwrap() + b.stderr.unwrap());
                assert!(gap <= band, "members {i},{j}: gap {gap:.3e} band {band:.3e}");
            }
        }
        assert!(matches!(
            smooth_body_sequence(&body, 0, FieldKind::Reeb, &quick_config(1.0), 2, 0),
            Err(Error::Precondition(_))
        ));
    }
}
