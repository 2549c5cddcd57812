//! Geometry and dynamics of Reeb flows on starshaped hypersurfaces in R^4,
//! with entropy estimators for smoothing sequences and for geodesic flows of
//! conformally flat torus metrics.
//!
//! The crate is organized around a defining function G for a starshaped
//! energy surface {G = 1}. `geometry` builds and compares such surfaces,
//! `contact` derives Hamiltonian and Reeb vector fields from the standard
//! Liouville form, `flow` integrates them, `entropy` estimates dynamical
//! complexity, and `geodesic` does the analogous work for unit cotangent
//! dynamics of conformal metrics on T^2.

pub mod contact;
pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod geodesic;
pub mod geometry;
pub mod ode;
pub mod report;
pub mod sampling;

mod serde_util;

pub use error::Error;

/// Points and tangent vectors in R^4, coordinates ordered (x1, y1, x2, y2).
pub type Vec4 = nalgebra::Vector4<f64>;
/// Dense 4x4 matrices (Hessians, Jacobians).
pub type Mat4 = nalgebra::Matrix4<f64>;
