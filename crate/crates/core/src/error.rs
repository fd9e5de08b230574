//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Errors carry enough context
//! to identify the offending argument without keeping a reference to it.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction rejected (dimension, spacing, extent or split index).
    #[error("invalid grid: {0}")]
    Grid(String),

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A sample or displacement left the grid hull.
    #[error("point escapes the grid hull: {0}")]
    HullEscape(String),

    /// The grid hull does not cover the requested integration region.
    #[error("grid hull too small: {0}")]
    Coverage(String),

    /// File serialization failed.
    #[error("field file i/o: {0}")]
    Io(#[from] std::io::Error),

    /// File deserialization failed.
    #[error("field file parse: {0}")]
    Parse(String),

    /// Unknown catalog integrand name.
    #[error("unknown integrand `{0}`")]
    UnknownIntegrand(String),

    /// Missing or out-of-range integrand parameter.
    #[error("integrand parameter: {0}")]
    Param(String),

    /// A sample violates the preconditions of a check.
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    /// Evaluation requested outside the integrand's smoothness domain.
    #[error("outside the smoothness domain: {0}")]
    OutsideSmoothDomain(String),

    /// Iterated logarithm or related map evaluated outside its domain.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// Deformation fails a structural invariant (directions, support, slopes).
    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),

    /// Piecewise assembly jumps across a selector interface.
    #[error("discontinuous piecewise assembly: {0}")]
    DiscontinuousAssembly(String),

    /// Fixed-point inversion of the sliding map did not converge.
    #[error("sliding inversion did not converge: {0}")]
    NonConvergentInversion(String),

    /// Quadrature configuration rejected (radii, scheme, singular guard).
    #[error("quadrature: {0}")]
    Quadrature(String),

    /// A variation direction is supported outside the allowed ball.
    #[error("support escapes the variation ball: {0}")]
    SupportEscape(String),

    /// Flow configuration rejected (time step, boundary rules, well shape).
    #[error("solver configuration: {0}")]
    Solver(String),

    /// A sampler repeatedly produced inadmissible perturbations.
    #[error("sampler failed: {0}")]
    Sampler(String),
}
