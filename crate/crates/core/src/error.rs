//! Crate-wide error type.

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    /// A value failed a construction-time validation check.
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    /// One of the boundary-scalar denominators vanished for this grid,
    /// i.e. the grid is too coarse for the given Robin parameters.
    #[error("degenerate boundary scalars at n = {n}: {denominator} = 0")]
    DegenerateBoundary { denominator: &'static str, n: usize },

    /// The lifting normalization `mu1*(mu2*alpha1 + beta1) = 1` has no solution.
    #[error("degenerate lift: mu2*alpha1 + beta1 = 0 for mu2 = {mu2}")]
    DegenerateLift { mu2: f64 },

    #[error("grid too coarse: n = {n}, the boundary stencils need n >= {min}")]
    GridTooCoarse { n: usize, min: usize },

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("size guard: {op} is limited to n <= {limit}, got n = {n}")]
    SizeGuard {
        op: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("precondition violated in {op}: {why}")]
    Precondition { op: &'static str, why: String },

    /// Crank-Nicolson step matrix `I - (dt/2) P_n` is singular.
    #[error(
        "singular step matrix with step_count = {step_count}; \
         increase step_count so dt moves away from the spectrum of P_n"
    )]
    SingularStepMatrix { step_count: usize },

    /// No `(M, omega)` pair on the search lattice dominates all samples.
    #[error(
        "no (M, omega) lattice pair dominates the growth samples; \
         max violation {max_violation:e} (lattice too small, not a method failure)"
    )]
    GrowthFitExhausted { max_violation: f64 },

    #[error("zero vector not allowed here")]
    ZeroVector,
}
