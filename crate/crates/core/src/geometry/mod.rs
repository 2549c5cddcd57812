//! Starshaped bodies in R^4: defining functions with exact derivatives,
//! radial gauges, sup-norm distances between surfaces, and smoothing
//! families for polytopes.

mod body;
mod check;
mod distance;
pub mod grid;
mod radial;
mod smoothing;
mod trig;

pub use body::{BodySpec, Halfspace, SmoothingScheme};
pub use check::{check_body, derivative_rel_err, BodyCheck};
pub use distance::{
    c0_distance, c1_distance_convex, convexity_check, C0Report, C1Report, ResolutionValue,
    Surface,
};
pub use radial::{radial_function, surface_point, transversality};
pub use smoothing::{build_family, smoothing_family, SmoothingFamily};
pub use trig::{TrigPolynomial, TrigTerm};

use crate::error::{Error, Result};
use crate::serde_util::tagged;
use crate::Mat4;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Version of the body / surface JSON documents under docs/schemas.
pub const BODY_SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PNormCubeDoc {
    p: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SmoothedPolytopeDoc {
    halfspaces: Vec<Halfspace>,
    scheme: SmoothingScheme,
    sharpness: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadialGraphDoc {
    base: Value,
    perturbation: TrigPolynomial,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadricDoc {
    #[serde(with = "crate::serde_util::mat4")]
    matrix: Mat4,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolytopeSurfaceDoc {
    halfspaces: Vec<Halfspace>,
}

fn body_to_value(body: &BodySpec) -> Value {
    match body {
        BodySpec::PNormCube { p } => tagged("pnorm_cube", json!({ "p": p })),
        BodySpec::SmoothedPolytope { halfspaces, scheme, sharpness } => tagged(
            "smoothed_polytope",
            serde_json::to_value(SmoothedPolytopeDoc {
                halfspaces: halfspaces.clone(),
                scheme: *scheme,
                sharpness: *sharpness,
            })
            .expect("serializable"),
        ),
        BodySpec::RadialGraph { base, perturbation } => tagged(
            "radial_graph",
            json!({
                "base": body_to_value(base),
                "perturbation": serde_json::to_value(perturbation).expect("serializable"),
            }),
        ),
        BodySpec::Quadric { matrix } => tagged(
            "quadric",
            serde_json::to_value(QuadricDoc { matrix: *matrix }).expect("serializable"),
        ),
    }
}

/// Strict parse of a kind-tagged body object (no version field at this
/// level); unknown kinds and unknown fields are schema errors.
fn body_from_value(v: Value) -> Result<BodySpec> {
    let Value::Object(mut obj) = v else {
        return Err(Error::spec("body specification must be a JSON object"));
    };
    let kind = match obj.remove("kind") {
        Some(Value::String(s)) => s,
        _ => return Err(Error::spec("body specification needs a string `kind` field")),
    };
    let rest = Value::Object(obj);
    let fail = |e: serde_json::Error| Error::spec(format!("invalid `{kind}` body: {e}"));
    let body = match kind.as_str() {
        "pnorm_cube" => {
            let d: PNormCubeDoc = serde_json::from_value(rest).map_err(fail)?;
            BodySpec::PNormCube { p: d.p }
        }
        "smoothed_polytope" => {
            let d: SmoothedPolytopeDoc = serde_json::from_value(rest).map_err(fail)?;
            BodySpec::SmoothedPolytope {
                halfspaces: d.halfspaces,
                scheme: d.scheme,
                sharpness: d.sharpness,
            }
        }
        "radial_graph" => {
            let d: RadialGraphDoc = serde_json::from_value(rest).map_err(fail)?;
            BodySpec::RadialGraph {
                base: Box::new(body_from_value(d.base)?),
                perturbation: d.perturbation,
            }
        }
        "quadric" => {
            let d: QuadricDoc = serde_json::from_value(rest).map_err(fail)?;
            BodySpec::Quadric { matrix: d.matrix }
        }
        other => return Err(Error::spec(format!("unknown body kind `{other}`"))),
    };
    body.validate()?;
    Ok(body)
}

fn strip_version(v: Value, what: &str) -> Result<Value> {
    crate::serde_util::strip_version(v, what, BODY_SCHEMA_VERSION)
}

fn add_version(v: Value) -> Value {
    crate::serde_util::add_version(v, BODY_SCHEMA_VERSION)
}

/// Versioned body document {"version": 1, "kind": ..., ...}.
pub fn body_to_json(body: &BodySpec) -> Value {
    add_version(body_to_value(body))
}

pub fn body_from_json(v: Value) -> Result<BodySpec> {
    body_from_value(strip_version(v, "body")?)
}

pub fn body_from_str(s: &str) -> Result<BodySpec> {
    let v: Value =
        serde_json::from_str(s).map_err(|e| Error::spec(format!("invalid JSON: {e}")))?;
    body_from_json(v)
}

/// Versioned surface document: a body document, or {"kind": "polytope", ...}
/// for the non-smooth radial limit of a halfspace intersection.
pub fn surface_to_json(surface: &Surface) -> Value {
    match surface {
        Surface::Body(b) => body_to_json(b),
        Surface::Polytope(hs) => add_version(tagged(
            "polytope",
            serde_json::to_value(PolytopeSurfaceDoc { halfspaces: hs.clone() })
                .expect("serializable"),
        )),
    }
}

pub fn surface_from_json(v: Value) -> Result<Surface> {
    let inner = strip_version(v, "surface")?;
    let is_polytope = inner
        .as_object()
        .and_then(|o| o.get("kind"))
        .and_then(Value::as_str)
        == Some("polytope");
    if is_polytope {
        let Value::Object(mut obj) = inner else { unreachable!() };
        obj.remove("kind");
        let d: PolytopeSurfaceDoc = serde_json::from_value(Value::Object(obj))
            .map_err(|e| Error::spec(format!("invalid polytope surface: {e}")))?;
        let s = Surface::Polytope(d.halfspaces);
        s.validate()?;
        Ok(s)
    } else {
        Ok(Surface::Body(body_from_value(inner)?))
    }
}

pub fn surface_from_str(s: &str) -> Result<Surface> {
    let v: Value =
        serde_json::from_str(s).map_err(|e| Error::spec(format!("invalid JSON: {e}")))?;
    surface_from_json(v)
}
