//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("Mobius map is degenerate (det = 0)")]
    DegenerateMoebius,
    #[error("circle parameters are degenerate (|B|^2 - AC <= 0)")]
    DegenerateCircle,
    #[error("coincident points do not determine a circle")]
    CoincidentPoints,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("embedding is not graph-like over the working annulus: {0}")]
    GraphFailure(String),
    #[error("boundary function evaluated outside the annulus (|eta| = {0:.3})")]
    EvaluationFailure(f64),
    #[error("Newton did not converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("Newton system is ill-conditioned (cond ~ {0:.3e})")]
    IllConditioned(f64),
    #[error("linear solve failed: singular Jacobian")]
    SingularJacobian,
    #[error("boundary velocity dropped below threshold (min |dF1/dtheta| = {0:.3e})")]
    DegenerateBoundary(f64),
    #[error("t = +/-inf is not a disk; query the limit descriptors instead")]
    InfiniteT,
    #[error("solver refused: {0}")]
    Refused(String),
    #[error("family frontier did not converge at {0} node(s): first failure at {1}")]
    FamilyFrontier(usize, String),
}

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("f_* is not surjective at the sample ({0})")]
    RankFailure(String),
    #[error("null-cone fit degenerate at ({0}): nullspace dimension != 1")]
    DegenerateCone(String),
    #[error("fitted cone has wrong signature at ({0})")]
    BadSignature(String),
    #[error("frame normal-form fit failed at ({0}): residual {1:.3e}")]
    FitFailure(String, f64),
    #[error("mu-relation consistency violated at ({0}): {1:.3e} > tol")]
    ConsistencyFailure(String, f64),
    #[error("stencil out of range at grid index {0:?}")]
    StencilOutOfRange([usize; 3]),
}

#[derive(Debug, Error)]
pub enum GeodesicError {
    #[error("zero vector cannot be classified")]
    ZeroVector,
    #[error("trace left the field domain at ({0:.4}, {1:.4}, {2:.4})")]
    LeftDomain(f64, f64, f64),
    #[error("foliation root-find failed at t = {0}: {1}")]
    FoliationFailure(f64, String),
    #[error("anchor point rejected: {0}")]
    BadAnchor(String),
}
