use crate::error::{Error, Result};
use crate::geometry::BodySpec;
use crate::Vec4;

const BRACKET_LO: f64 = 1e-6;
const BRACKET_HI: f64 = 1e6;
const REL_TOL: f64 = 1e-12;

fn dir_string(u: &Vec4) -> String {
    format!("{:.6}, {:.6}, {:.6}, {:.6}", u[0], u[1], u[2], u[3])
}

/// Radial gauge root: the unique t > 0 with G(t u) = 1 for a body starshaped
/// about the origin. `u` is normalized internally.
///
/// Safeguarded Newton on t -> G(t u) - 1 inside a sign-changing bracket,
/// falling back to bisection whenever a Newton step leaves the bracket or the
/// directional derivative degenerates; robust near polytope corners where G
/// is steep. Converges to relative tolerance 1e-12.
pub fn radial_function(body: &BodySpec, direction: &Vec4) -> Result<f64> {
    let n = direction.norm();
    if !n.is_finite() || n < 1e-14 {
        return Err(Error::domain("radial direction must be nonzero"));
    }
    let u = direction / n;
    let g = |t: f64| -> Result<f64> { body.value(&(u * t)).map(|v| v - 1.0) };

    // Closed-form seed when G is homogeneous; the Newton loop still refines
    // so every variant goes through the same contract.
    let mut t = match body.homogeneity() {
        Some(k) => {
            let v = body.value(&u)?;
            if v > 0.0 && v.is_finite() {
                v.powf(-1.0 / k).clamp(BRACKET_LO, BRACKET_HI)
            } else {
                1.0
            }
        }
        None => 1.0,
    };

    // Establish a bracket [lo, hi] with g(lo) < 0 < g(hi).
    let mut lo = BRACKET_LO;
    let glo = g(lo)?;
    if glo >= 0.0 {
        return Err(Error::Starshaped {
            dir: dir_string(&u),
            detail: format!("G({BRACKET_LO:.0e} u) - 1 = {glo:.3e} >= 0 at the inner bracket"),
        });
    }
    let mut hi = t.max(1.0);
    let mut ghi = g(hi)?;
    while ghi < 0.0 {
        hi *= 4.0;
        if hi > BRACKET_HI {
            return Err(Error::Starshaped {
                dir: dir_string(&u),
                detail: format!("no root of G(t u) = 1 for t in [{BRACKET_LO:.0e}, {BRACKET_HI:.0e}]"),
            });
        }
        ghi = g(hi)?;
    }
    if ghi == 0.0 {
        return Ok(hi);
    }

    t = t.clamp(lo, hi);
    let mut gt = g(t)?;
    for _ in 0..200 {
        if gt == 0.0 {
            return Ok(t);
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // Newton proposal; bisection when unusable.
        let slope = body
            .gradient(&(u * t))
            .ok()
            .map(|gr| gr.dot(&u))
            .filter(|s| s.is_finite() && s.abs() > 1e-300);
        let mut next = match slope {
            Some(s) => t - gt / s,
            None => 0.5 * (lo + hi),
        };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let dt = (next - t).abs();
        t = next;
        gt = g(t)?;
        if dt <= REL_TOL * t.abs() {
            return Ok(t);
        }
    }
    Err(Error::Starshaped {
        dir: dir_string(&u),
        detail: "radial root refinement did not converge".to_string(),
    })
}

/// The surface point rho(u) u on {G = 1}.
pub fn surface_point(body: &BodySpec, direction: &Vec4) -> Result<Vec4> {
    let n = direction.norm();
    if n < 1e-14 {
        return Err(Error::domain("radial direction must be nonzero"));
    }
    let u = direction / n;
    Ok(u * radial_function(body, &u)?)
}

/// Radial transversality margin <grad G(x), x> at a surface point; must be
/// positive for the level set to be a starshaped hypersurface there.
pub fn transversality(body: &BodySpec, x: &Vec4) -> Result<f64> {
    Ok(body.gradient(x)?.dot(x))
}
