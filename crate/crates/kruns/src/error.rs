//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by parameter validation, constant evaluation, matching and
/// the oracles.
///
/// Numeric payloads are carried as strings so the error type stays independent
/// of the scalar backend (exact rationals do not implement `Display` concisely
/// and `f64` round-trips losslessly through its `Display` form).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A probability parameter fell outside the open interval (0, 1).
    #[error("probability {name} = {value} must lie strictly inside (0, 1)")]
    ProbabilityOutOfRange { name: &'static str, value: String },

    /// Run lengths must both be at least one.
    #[error("run lengths must satisfy k1 >= 1 and k2 >= 1 (got k1 = {k1}, k2 = {k2})")]
    InvalidPattern { k1: usize, k2: usize },

    /// A decimal literal could not be parsed into the active scalar type.
    #[error("'{literal}' is not a plain decimal literal")]
    InvalidDecimalLiteral { literal: String },

    /// `c_const` is defined for indices 1 through 6 only.
    #[error("constant index {index} is unsupported (defined for 1..=6)")]
    UnsupportedConstantIndex { index: usize },

    /// Power-series division needs an invertible constant coefficient.
    #[error("series division requires a nonzero constant term in the denominator")]
    SeriesNonUnitDenominator,

    /// A probability generating function was evaluated at a pole.
    #[error("generating function evaluated at a pole ({context})")]
    EvaluationAtPole { context: &'static str },

    /// The linear solve for a waiting-time moment degenerated.
    #[error("waiting-time moment solve is degenerate: the coefficient of the unknown vanishes")]
    DegenerateMomentSolve,

    /// Two-parameter matching is only defined for one sign of `s_nk`.
    #[error("two-parameter {family} matching inapplicable: requires {requirement} (s_nk = {snk})")]
    MatchingInapplicable {
        family: &'static str,
        requirement: &'static str,
        snk: String,
    },

    /// A matched parameter fell outside its admissible range.
    #[error("matched parameter {name} = {value} falls outside {range}")]
    MatchedParameterOutOfRange {
        name: &'static str,
        value: String,
        range: &'static str,
    },

    /// A Gibbs-measure specification produced a negative mass ratio inside
    /// its own support.
    #[error("invalid Gibbs specification: {detail}")]
    InvalidGibbsSpec { detail: String },

    /// Exhaustive enumeration is capped to keep runtimes sane.
    #[error("exhaustive enumeration supports n <= {max} (got n = {n})")]
    EnumerationTooLarge { n: usize, max: usize },

    /// A bound was requested from a report that does not carry one.
    #[error("bound unavailable: {reason}")]
    BoundUnavailable { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
