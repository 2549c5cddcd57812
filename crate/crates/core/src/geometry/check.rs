use crate::error::Result;
use crate::geometry::{grid, radial, BodySpec};
use crate::Vec4;
use serde::{Deserialize, Serialize};

/// Outcome of the sampled geometry health checks. Failures are recorded, not
/// raised, so callers can print a full summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BodyCheck {
    pub samples: usize,
    pub starshaped: bool,
    pub starshape_failure: Option<String>,
    pub transversality_min: f64,
    pub derivative_max_rel_err: f64,
    pub passed: bool,
}

const DERIVATIVE_SAMPLES: usize = 32;
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-6;

/// Sampled starshapedness, transversality and derivative consistency.
///
/// Radial roots are sought along a deterministic quasi-uniform direction set;
/// gradient and Hessian are compared against central finite differences on a
/// fixed subsample near the surface.
pub fn check_body(body: &BodySpec, samples: usize) -> Result<BodyCheck> {
    body.validate()?;
    let mut starshaped = true;
    let mut starshape_failure = None;
    let mut transversality_min = f64::INFINITY;
    let mut surface_points = Vec::new();

    for (k, u) in grid::directions(samples.max(16)).enumerate() {
        match radial::surface_point(body, &u) {
            Ok(x) => {
                let margin = body.gradient(&x).map(|g| g.dot(&x)).unwrap_or(f64::NAN);
                if !(margin > 0.0) {
                    starshaped = false;
                    starshape_failure
                        .get_or_insert_with(|| format!("nonpositive radial derivative {margin:.3e}"));
                }
                transversality_min = transversality_min.min(margin);
                if surface_points.len() < DERIVATIVE_SAMPLES {
                    surface_points.push(x);
                }
            }
            Err(e) => {
                starshaped = false;
                starshape_failure.get_or_insert_with(|| format!("sample {k}: {e}"));
            }
        }
    }

    let mut max_rel = 0.0f64;
    for x in &surface_points {
        max_rel = max_rel.max(derivative_rel_err(body, x)?);
    }

    let passed = starshaped && transversality_min > 0.0 && max_rel <= FD_REL_TOL;
    Ok(BodyCheck {
        samples,
        starshaped,
        starshape_failure,
        transversality_min,
        derivative_max_rel_err: max_rel,
        passed,
    })
}

/// Worst relative deviation of gradient and Hessian from central finite
/// differences at step 1e-5.
pub fn derivative_rel_err(body: &BodySpec, x: &Vec4) -> Result<f64> {
    let mut worst = 0.0f64;
    let g = body.gradient(x)?;
    let gscale = g.norm().max(1.0);
    for i in 0..4 {
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += FD_STEP;
        xm[i] -= FD_STEP;
        let fd = (body.value(&xp)? - body.value(&xm)?) / (2.0 * FD_STEP);
        worst = worst.max((g[i] - fd).abs() / gscale);
    }
    let h = body.hessian(x)?;
    let hscale = h.norm().max(1.0);
    for j in 0..4 {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += FD_STEP;
        xm[j] -= FD_STEP;
        let col = (body.gradient(&xp)? - body.gradient(&xm)?) / (2.0 * FD_STEP);
        for i in 0..4 {
            worst = worst.max((h[(i, j)] - col[i]).abs() / hscale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Halfspace, SmoothingScheme};

    #[test]
    fn healthy_bodies_pass() {
        let bodies = [
            BodySpec::pnorm_cube(8).unwrap(),
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::LogSumExp, 10.0)
                .unwrap(),
        ];
        for b in bodies {
            let report = check_body(&b, 512).unwrap();
            assert!(report.passed, "{report:?}");
            assert!(report.transversality_min > 0.0);
        }
    }

    #[test]
    fn non_starshaped_body_fails_the_check() {
        use crate::Vec4;
        let half = vec![Halfspace::new(Vec4::new(1.0, 0.0, 0.0, 0.0), 1.0).unwrap()];
        let b = BodySpec::smoothed_polytope(half, SmoothingScheme::PNorm, 4.0).unwrap();
        let report = check_body(&b, 256).unwrap();
        assert!(!report.passed);
        assert!(!report.starshaped);
        assert!(report.starshape_failure.is_some());
    }
}
