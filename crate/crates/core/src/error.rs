use thiserror::Error;

/// Error taxonomy shared by every module. The CLI maps `Spec` to exit code 2,
/// `Integration` to 4 and everything else to 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input specification (bad JSON, invalid
    /// parameter ranges, schema violations).
    #[error("invalid specification: {0}")]
    Spec(String),

    /// Evaluation requested outside the domain of validity (origin for a
    /// radial graph, non-smooth point of a degenerate body, missing
    /// derivative of a rough factor).
    #[error("domain error: {0}")]
    Domain(String),

    /// No radial root in the bracketing interval: the surface is not
    /// starshaped about the origin along the given direction.
    #[error("starshapedness violation along direction ({dir}): {detail}")]
    Starshaped { dir: String, detail: String },

    /// The radial transversality <grad G, x> > 0 fails at a surface point.
    #[error("degenerate point: radial derivative {radial_derivative:.3e} at ({point})")]
    Degenerate { point: String, radial_derivative: f64 },

    /// A smoothing-family member failed its construction checks.
    #[error("smoothing construction failed at sharpness {sharpness}: {detail}")]
    SmoothingConstruction { sharpness: f64, detail: String },

    /// A convexity precondition failed at a sampled surface point.
    #[error("convexity violation: {0}")]
    Convexity(String),

    /// Grid or quadrature resolution insufficient to certify the requested
    /// property.
    #[error("resolution insufficient: {0}")]
    Resolution(String),

    /// Caller violated an operation precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The object cannot support the requested operation at all (for
    /// example, derivatives of a factor that is only continuous).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Adaptive integration failed (step size underflow or step budget
    /// exhausted). Carries the last good time for diagnostics.
    #[error("integration failure at t = {t:.6e}: {detail}")]
    Integration { t: f64, detail: String },
}

impl Error {
    pub fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
