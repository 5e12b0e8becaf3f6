//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by measure handling, solvers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument was structurally invalid (e.g. a nonpositive tolerance).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A measure description file failed to parse or validate.
    #[error("measure file error: {0}")]
    MeasureFile(String),

    /// The integrand returned a non-finite value during integration.
    #[error("evaluation error: non-finite integrand value at x = {at}")]
    Evaluation { at: f64 },

    /// Picard iteration did not reach the requested tolerance.
    #[error("iteration limit reached after {iterations} sweeps (last residual {residual:.3e}, tol {tol:.3e})")]
    IterationLimit {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    /// The Weyl disk degenerated (W(s, s*) = 0); only possible for real z.
    #[error("degenerate Weyl disk at x0 = {x0}")]
    DegenerateDisk { x0: f64 },

    /// The operation only supports purely atomic measures.
    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),

    /// u(z, 0) = 0 while computing m; impossible for Im z > 0 and signals a bug.
    #[error("pole of m encountered at z = {z}")]
    PoleOfM { z: num_complex::Complex64 },

    /// An inner m-estimate was too uncertain to be used (e.g. inside a quadrature).
    #[error("inconclusive m-estimate at node {node} (t = {t}): error radius {error_radius:.3e}")]
    Inconclusive {
        node: usize,
        t: f64,
        error_radius: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
