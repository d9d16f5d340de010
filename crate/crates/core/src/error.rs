use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum KdError {
    #[error("evaluation point within {dist:.3e} of a pole of the continued density")]
    PoleHit { dist: f64 },

    #[error("density vanishes (or is negative) at the origin; critical coupling undefined")]
    DegenerateDensity,

    #[error("beta map is only defined on the closed lower half-plane (Im z = {im:.3e})")]
    UpperHalfPlane { im: f64 },

    #[error("argument {value} outside the admissible range {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("no partially locked state: self-consistency residual has no root on (0, 1)")]
    NoSolution,

    #[error("weight rate a = {a} is at or above the analyticity half-width {limit}")]
    WeightTooLarge { a: f64, limit: f64 },

    #[error("contour point too close to the spectral axis: Re(lambda) = {re:.3e}")]
    AxisTooClose { re: f64 },

    #[error("|D(lambda)| = {modulus:.3e} below winding floor on the contour")]
    ContourTooClose { modulus: f64 },

    #[error("iteration did not converge: {what}")]
    NonConvergent { what: &'static str },

    #[error("operation requires an even frequency distribution")]
    NotEven,

    #[error("bi-Cauchy distribution is unimodal for omega0 <= delta/sqrt(3)")]
    NotBimodal,

    #[error("no PLS branch exists at this coupling (below the fold)")]
    NoBranch,

    #[error("perturbation grew by more than 10x: trajectory diverges from the PLS circle")]
    DivergenceDetected,

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, KdError>;
