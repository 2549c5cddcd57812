//! Frozen demonstration objects shared by the tests, the acceptance suite,
//! and the CLI's named presets.
//!
//! The empirically tuned values here (the demo body's perturbation mode, the
//! bumpy-torus amplitude, the rough factor's smoothing threshold) were fixed
//! by parameter scans during development and then frozen; the tests assert
//! the frozen behavior, they do not re-tune.

use crate::geodesic::{ConformalMetric, FourierFactor, FourierTerm, WeierstrassFactor};
use crate::geometry::{BodySpec, Halfspace, Surface, TrigPolynomial, TrigTerm};
use crate::{Mat4, Vec4};

/// Ellipsoid x1² + y1² + 2x2² + 2y2² = 1. Integrable: each symplectic plane
/// carries its own conserved quadratic.
pub fn ellipsoid() -> BodySpec {
    BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 2.0, 2.0)))
        .expect("diagonal quadric is positive definite")
}

fn one_mode(coefficient: f64, frequency: [i32; 4]) -> TrigPolynomial {
    TrigPolynomial::new(vec![TrigTerm { coefficient, frequency, phase: 0.0 }])
        .expect("finite coefficients")
}

/// Convex radial graph over [`ellipsoid`] whose Reeb flow yields a Lyapunov
/// estimate well clear of its ensemble error (value/stderr ≈ 12 at T = 10³,
/// N = 20, seeds 7/8/9). The single mode and its amplitude are frozen from a
/// scan; higher-frequency modes at this amplitude lose convexity. The
/// estimate demonstrates that the estimator flags stretching — it is not a
/// chaos certificate.
pub fn chaotic_demo() -> BodySpec {
    BodySpec::radial_graph(ellipsoid(), one_mode(0.15, [3, 1, 1, 1]))
        .expect("frozen perturbation keeps the graph starshaped")
}

/// Radial graph over the round sphere with one oblique mode: the smallest
/// smooth body with a genuinely direction-dependent conformal factor. Used
/// wherever a non-homogeneous yet cheap fixture is wanted (graph-form
/// residuals, reparametrization cross-checks).
pub fn wobbly_sphere() -> BodySpec {
    BodySpec::radial_graph(
        BodySpec::pnorm_cube(2).expect("p = 2 is even"),
        one_mode(0.1, [1, 1, 0, 0]),
    )
    .expect("frozen perturbation keeps the graph starshaped")
}

/// Grid resolution at which fixture metrics are normalized and their areas
/// reported.
pub const METRIC_AREA_RESOLUTION: usize = 256;

/// Conformal factor A·(cos2πq₁ cos2πq₂ + 0.7·cos4πq₂) with A = 0.3, rescaled
/// to unit area. The amplitude is frozen from a scan: the geodesic Lyapunov
/// estimate is ≈ 1.06 with value/stderr ≈ 19 at T = 10³, N = 20 (≈ 38 at
/// T = 300, N = 8) — exponential stretching, far above the ln(cT)/T
/// transient that integrable flows show.
pub fn bumpy_torus() -> ConformalMetric {
    let amp = 0.3;
    let metric = ConformalMetric::Fourier(FourierFactor {
        terms: vec![
            FourierTerm { coefficient: 0.5 * amp, frequency: [1, -1], phase: 0.0 },
            FourierTerm { coefficient: 0.5 * amp, frequency: [1, 1], phase: 0.0 },
            FourierTerm { coefficient: 0.7 * amp, frequency: [0, 2], phase: 0.0 },
        ],
    });
    crate::geodesic::normalized_to_unit_area(&metric, METRIC_AREA_RESOLUTION)
        .expect("trig factor has finite area")
}

/// Truncated lacunary factor (ratio ½, base 3, six octaves, amplitude 0.08):
/// continuous data with no usable derivatives, standing in for a nowhere-
/// differentiable conformal factor. Smooth it with [`rough_scales`] before
/// integrating anything.
pub fn rough_metric() -> ConformalMetric {
    ConformalMetric::Weierstrass(WeierstrassFactor {
        ratio: 0.5,
        base: 3,
        terms: 6,
        amplitude: 0.08,
        offset: 0.0,
    })
}

/// Smoothing schedule for [`rough_metric`]: scales at which the mollified
/// factors' sup-distance to the rough base strictly decreases.
pub fn rough_scales() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

/// Quadrature resolution used for every mollification of [`rough_metric`].
pub const ROUGH_RESOLUTION: usize = 1024;

/// Grid resolution for sup-norm comparisons against the rough base.
pub const ROUGH_CHECK_RESOLUTION: usize = 512;

/// Sandwich width used with the rough factor.
pub const ROUGH_DELTA: f64 = 0.1;

/// Largest scale whose mollification of [`rough_metric`] stays within
/// [`ROUGH_DELTA`] of the base in sup norm. Bisected once at
/// [`ROUGH_RESOLUTION`] / [`ROUGH_CHECK_RESOLUTION`], then frozen.
pub const ROUGH_SIGMA_STAR: f64 = 0.29708042144775393;

/// Named bodies accepted by the CLI wherever a body file path is expected.
/// `cube_pN` resolves for any valid sharpness N.
pub fn preset_body(name: &str) -> Option<BodySpec> {
    match name {
        "ellipsoid" => Some(ellipsoid()),
        "chaotic_demo" => Some(chaotic_demo()),
        "wobbly_sphere" => Some(wobbly_sphere()),
        _ => name
            .strip_prefix("cube_p")
            .and_then(|p| p.parse().ok())
            .and_then(|p| BodySpec::pnorm_cube(p).ok()),
    }
}

/// Named distance targets: every body preset, plus the non-smooth limit of
/// the cube family.
pub fn preset_surface(name: &str) -> Option<Surface> {
    if name == "cube_limit" {
        return Some(Surface::Polytope(Halfspace::cube()));
    }
    preset_body(name).map(Surface::Body)
}

/// Named conformal metrics accepted by the CLI.
pub fn preset_metric(name: &str) -> Option<ConformalMetric> {
    match name {
        "flat" => Some(ConformalMetric::flat()),
        "bumpy_torus" => Some(bumpy_torus()),
        "rough" => Some(rough_metric()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy;
    use crate::flow::{FieldKind, FlowConfig};
    use crate::geodesic::{self, MollifiedFactor};
    use crate::geometry::convexity_check;

    fn snapshot_free(horizon: f64) -> FlowConfig {
        FlowConfig { horizon, sample_interval: horizon, ..FlowConfig::default() }
    }

    #[test]
    fn presets_resolve_and_validate() {
        for name in ["cube_p2", "cube_p16", "ellipsoid", "chaotic_demo", "wobbly_sphere"] {
            preset_body(name).unwrap().validate().unwrap();
        }
        assert!(preset_body("cube_p3").is_none(), "odd sharpness is not a body");
        assert!(preset_body("unknown").is_none());
        preset_surface("cube_limit").unwrap().validate().unwrap();
        assert!(preset_surface("chaotic_demo").is_some());
        for name in ["flat", "bumpy_torus", "rough"] {
            preset_metric(name).unwrap().validate().unwrap();
        }
        assert!(preset_metric("unknown").is_none());
    }

    #[test]
    fn demo_body_is_convex() {
        convexity_check(&chaotic_demo(), 4096).unwrap();
    }

    #[test]
    fn demo_estimate_rises_above_its_noise() {
        // Short-horizon smoke check; the full-strength version (T = 10³,
        // N = 20, three seeds) runs in the acceptance suite.
        let est =
            entropy::lyapunov_estimate(&chaotic_demo(), FieldKind::Reeb, &snapshot_free(200.0), 6, 7)
                .unwrap();
        let stderr = est.stderr.unwrap();
        assert!(est.value > 3.0 * stderr, "value {} stderr {stderr}", est.value);
        assert_eq!(est.excluded, 0);
    }

    #[test]
    fn demo_orbits_keep_separating() {
        // Cross-check with the counting estimator: at radius 0.05 the initial
        // packing nearly saturates (491 of 500), so the bar is bare positivity
        // of the growth rate.
        let est = entropy::separated_set_estimate(
            &chaotic_demo(),
            FieldKind::Reeb,
            &snapshot_free(200.0),
            100,
            0.05,
            500,
            7,
        )
        .unwrap();
        assert!(est.value > 0.0, "separation rate {}", est.value);
    }

    #[test]
    fn bumpy_metric_stretches_orbits() {
        let est = geodesic::geodesic_entropy(&bumpy_torus(), &snapshot_free(300.0), 8, 7).unwrap();
        let stderr = est.stderr.unwrap();
        assert!(est.value > 3.0 * stderr, "value {} stderr {stderr}", est.value);
        // Measured ≈ 1.1: genuine exponential stretching, not the ln(cT)/T
        // transient (≈ 0.02 at this horizon).
        assert!(est.value > 0.5, "value {}", est.value);
    }

    #[test]
    fn bumpy_metric_has_unit_area() {
        let area = geodesic::metric_area(&bumpy_torus(), METRIC_AREA_RESOLUTION).unwrap();
        assert!((area.value - 1.0).abs() <= 1e-12, "area {}", area.value);
    }

    #[test]
    fn rough_threshold_matches_frozen_value() {
        let sigma = geodesic::mollify_threshold(
            &rough_metric(),
            ROUGH_DELTA,
            ROUGH_RESOLUTION,
            ROUGH_CHECK_RESOLUTION,
        )
        .unwrap();
        assert!((sigma - ROUGH_SIGMA_STAR).abs() < 1e-9, "sigma {sigma}");
    }

    #[test]
    fn rough_schedule_smooths_within_the_frozen_width() {
        let base = rough_metric();
        let members = geodesic::mollify_sequence(&base, &rough_scales(), ROUGH_RESOLUTION).unwrap();
        for member in &members {
            let area = geodesic::metric_area(member, METRIC_AREA_RESOLUTION).unwrap().value;
            assert!((0.75..1.25).contains(&area), "area {area}");
            let vs_base =
                geodesic::sandwich_check(&base, member, ROUGH_DELTA, ROUGH_CHECK_RESOLUTION)
                    .unwrap();
            assert!(vs_base.pass, "gap {}", vs_base.max_gap);
        }
        // The frozen threshold itself passes, and a slightly larger scale
        // does not: the bisection bracketed the crossing.
        let at_star = ConformalMetric::Mollified(
            MollifiedFactor::new(base.clone(), ROUGH_SIGMA_STAR, ROUGH_RESOLUTION).unwrap(),
        );
        assert!(geodesic::sandwich_check(&base, &at_star, ROUGH_DELTA, ROUGH_CHECK_RESOLUTION)
            .unwrap()
            .pass);
        let above = ConformalMetric::Mollified(
            MollifiedFactor::new(base, ROUGH_SIGMA_STAR + 2e-3, ROUGH_RESOLUTION).unwrap(),
        );
        assert!(!geodesic::sandwich_check(&rough_metric(), &above, ROUGH_DELTA, ROUGH_CHECK_RESOLUTION)
            .unwrap()
            .pass);
    }
}
