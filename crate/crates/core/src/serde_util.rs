//! Serde adapters (fixed-size nalgebra types as plain JSON arrays) and the
//! shared shape of versioned, kind-tagged document objects.

use crate::error::{Error, Result};
use serde_json::{json, Map, Value};

/// {"kind": ..., <payload fields>} with the payload flattened in.
pub(crate) fn tagged(kind: &str, payload: Value) -> Value {
    let mut obj = Map::new();
    obj.insert("kind".into(), Value::String(kind.into()));
    if let Value::Object(m) = payload {
        obj.extend(m);
    }
    Value::Object(obj)
}

/// Prepends {"version": n} to a tagged object.
pub(crate) fn add_version(v: Value, version: u64) -> Value {
    let Value::Object(mut obj) = v else { unreachable!("tagged objects") };
    let mut out = Map::new();
    out.insert("version".into(), json!(version));
    out.append(&mut obj);
    Value::Object(out)
}

/// Checks and removes the `version` field of a document object.
pub(crate) fn strip_version(v: Value, what: &str, version: u64) -> Result<Value> {
    let Value::Object(mut obj) = v else {
        return Err(Error::spec(format!("{what} document must be a JSON object")));
    };
    match obj.remove("version") {
        Some(Value::Number(n)) if n.as_u64() == Some(version) => {}
        Some(other) => {
            return Err(Error::spec(format!(
                "unsupported {what} document version {other}"
            )))
        }
        None => {
            return Err(Error::spec(format!(
                "{what} document is missing the `version` field"
            )))
        }
    }
    Ok(Value::Object(obj))
}

pub mod vec2 {
    use nalgebra::Vector2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector2<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v[0], v[1]].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector2<f64>, D::Error> {
        let a = <[f64; 2]>::deserialize(d)?;
        Ok(Vector2::new(a[0], a[1]))
    }
}

pub mod vec4 {
    use crate::Vec4;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec4, s: S) -> Result<S::Ok, S::Error> {
        [v[0], v[1], v[2], v[3]].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec4, D::Error> {
        let a = <[f64; 4]>::deserialize(d)?;
        Ok(Vec4::new(a[0], a[1], a[2], a[3]))
    }
}

pub mod mat4 {
    use crate::Mat4;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    /// Row-major 4x4 nested arrays.
    pub fn serialize<S: Serializer>(m: &Mat4, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 4]; 4] =
            std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat4, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(d)?;
        Ok(Mat4::from_fn(|i, j| rows[i][j]))
    }
}
