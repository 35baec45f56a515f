use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the region where the quantity is defined
    /// (strip, doubled strip, parameter range).
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature or series produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A convolution power would need a grid larger than the configured cap.
    #[error("grid of {requested} points exceeds the limit of {limit}")]
    Size { requested: usize, limit: usize },

    /// The measure descriptor violates one of the measure invariants.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// |f| fell below the boundary threshold on the contour.
    #[error("function nearly vanishes on the contour (|f| = {min_modulus:e} at {location})")]
    BoundaryZero { min_modulus: f64, location: String },

    /// Adaptive bisection of a contour segment exceeded the depth limit.
    #[error("contour refinement exceeded depth {depth} near {location}")]
    RefinementLimit { depth: u32, location: String },

    /// Root bracketing or an iteration failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// The square-integrability condition needed for a finite linear limit fails.
    #[error("linear-variance condition fails: {0}")]
    CondL2(String),

    /// Not enough data points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A simulation error annotated with the replication it came from.
    #[error("replication {replication} (seed {seed:#018x}, T = {t}): {source}")]
    Replication {
        replication: usize,
        seed: u64,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
