use crate::error::{Error, Result};
use crate::geometry::{distance, grid, radial, BodySpec, Halfspace, SmoothingScheme, Surface};

/// Grid used when certifying family construction; coarse is fine here because
/// the certified property (strict decrease) has gaps far above grid error.
const VERIFY_RESOLUTION: usize = 2048;
const STARSHAPE_SAMPLES: usize = 128;

/// A smoothing schedule for a polytope, with the certified distances to the
/// polytope's radial limit.
#[derive(Debug, Clone)]
pub struct SmoothingFamily {
    pub members: Vec<BodySpec>,
    pub sharpness: Vec<f64>,
    pub limit_distance: Vec<f64>,
}

/// Builds the smooth approximants for a strictly increasing sharpness
/// schedule and certifies that their radial sup-distance to the polytope
/// limit strictly decreases along it.
pub fn build_family(
    halfspaces: &[Halfspace],
    scheme: SmoothingScheme,
    schedule: &[f64],
) -> Result<SmoothingFamily> {
    if schedule.is_empty() {
        return Err(Error::spec("smoothing schedule must be non-empty"));
    }
    if schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::spec("smoothing schedule must be strictly increasing"));
    }
    let limit = Surface::Polytope(halfspaces.to_vec());
    limit.validate()?;

    let mut members = Vec::with_capacity(schedule.len());
    let mut distances = Vec::with_capacity(schedule.len());
    for &sharp in schedule {
        let body = BodySpec::smoothed_polytope(halfspaces.to_vec(), scheme, sharp)?;
        starshape_sample_check(&body).map_err(|e| Error::SmoothingConstruction {
            sharpness: sharp,
            detail: e.to_string(),
        })?;
        let d = distance::c0_distance(&Surface::Body(body.clone()), &limit, VERIFY_RESOLUTION)?;
        if let Some(&prev) = distances.last() {
            if !(d.value < prev) {
                return Err(Error::SmoothingConstruction {
                    sharpness: sharp,
                    detail: format!(
                        "limit distance did not decrease: {prev:.6e} -> {:.6e}",
                        d.value
                    ),
                });
            }
        }
        distances.push(d.value);
        members.push(body);
    }
    Ok(SmoothingFamily {
        members,
        sharpness: schedule.to_vec(),
        limit_distance: distances,
    })
}

/// Members only; see `build_family` for the certified distances.
pub fn smoothing_family(
    halfspaces: &[Halfspace],
    scheme: SmoothingScheme,
    schedule: &[f64],
) -> Result<Vec<BodySpec>> {
    Ok(build_family(halfspaces, scheme, schedule)?.members)
}

/// Radial roots exist and are transversal along a deterministic direction
/// sample. Guards log-sum-exp members, whose level set is not scale-invariant.
fn starshape_sample_check(body: &BodySpec) -> Result<()> {
    for u in grid::directions(STARSHAPE_SAMPLES) {
        let x = radial::surface_point(body, &u)?;
        let margin = radial::transversality(body, &x)?;
        if margin <= 0.0 {
            return Err(Error::Degenerate {
                point: format!("{:.6}, {:.6}, {:.6}, {:.6}", x[0], x[1], x[2], x[3]),
                radial_derivative: margin,
            });
        }
    }
    Ok(())
}
