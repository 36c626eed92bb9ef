use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("syntax error at byte {offset}: expected one of [{}]", expected.join(", "))]
    Syntax { offset: usize, expected: Vec<String> },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("non-finite value while evaluating {context}")]
    NonFinite { context: String },

    #[error("division by zero")]
    DivisionByZero,

    #[error("vector field is not periodic: |xi(t, x + L) - xi(t, x)| = {deviation:e} at t = {t}, x = {x}")]
    NotPeriodic { t: f64, x: f64, deviation: f64 },

    #[error("embedding is not spacelike at site {site} (Q11 = {q11:e})")]
    NotSpacelike { site: usize, q11: f64 },

    #[error("vector field vanishes at site {site}")]
    VanishingField { site: usize },

    #[error("degenerate pulled-back metric (det G = {det:e})")]
    DegenerateMetric { det: f64 },

    #[error("orientation-reversing covariance field (det du = {det:e})")]
    OrientationReversed { det: f64 },

    #[error("smeared functionals were evaluated at different states")]
    StateMismatch,

    #[error("singular constraint matrix (condition number {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("state is off the reduced surface: {which} = {residual:e} exceeds {tolerance:e}")]
    OffSurface { which: &'static str, residual: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-normalizable Gibbs specification: {0}")]
    NonNormalizable(String),

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("insufficient overlap for reweighting: effective sample size {ess:.2} < {min}")]
    InsufficientOverlap { ess: f64, min: f64 },

    #[error("flow aborted at lambda = {lambda}: {reason}")]
    FlowAborted { lambda: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
