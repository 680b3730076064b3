use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point lies outside the valid region of its chart.
    #[error("point {coords:?} lies outside the chart region of {model}")]
    OutsideChart { model: String, coords: Vec<f64> },

    /// A starting point is on or outside the domain boundary.
    #[error("start point is not strictly inside the domain (signed distance {signed_distance:e})")]
    NotInterior { signed_distance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("stencil at node {node:?} is incomplete")]
    IncompleteStencil { node: Vec<usize> },

    /// The shooting solution changes sign, so `lambda` is at or below the
    /// principal Dirichlet eigenvalue and no bounded positive solution exists.
    #[error("eigenvalue crossing: lambda = {lambda} is at or below the principal Dirichlet eigenvalue")]
    EigenvalueCrossing { lambda: f64 },

    #[error("eigen-sum truncation error {bound:e} exceeds {tolerance:e} at t = {t}")]
    Truncation { t: f64, bound: f64, tolerance: f64 },

    #[error("quadrature did not converge: estimated error {error:e} on [{a}, {b}]")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("ODE integration failed at r = {at}: {reason}")]
    Integration { at: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
