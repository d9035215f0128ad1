//! Error types for every module.

use thiserror::Error;

/// One failed data-integrity rule of a network model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed network file: {0}")]
    Parse(String),
    #[error("invalid network model: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("network graph is disconnected: bus {0} is unreachable from the slack bus")]
    Disconnected(usize),
    #[error("duplicate line between buses {0} and {1}")]
    DuplicateLine(usize, usize),
    #[error("line from bus {0} to itself")]
    SelfLoop(usize),
    #[error("line endpoint {bus} outside 0..={n}")]
    BusOutOfRange { bus: usize, n: usize },
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("bus index {bus} outside 1..={n}")]
    BusOutOfRange { bus: usize, n: usize },
    #[error("squared voltage bound must be non-negative, got {0}")]
    NegativeBound(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error(
        "link family {family} {indices:?} does not annihilate the monomial manifold (residual {residual:e}, allowed {allowed:e})"
    )]
    NotAnnihilating { family: u8, indices: Vec<usize>, residual: f64, allowed: f64 },
    #[error("link family {family} {indices:?} is not Hermitian")]
    NotHermitian { family: u8, indices: Vec<usize> },
    #[error("annihilation check needs at least one trial")]
    NoTrials,
}

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum SdpError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("malformed SDPA data: {0}")]
    Format(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum FeasibilityError {
    #[error("query dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("multiplier count mismatch: expected {expected}, found {found}")]
    MultiplierMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// Which side of a bus interval a certificate block bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Min,
    Max,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Min => "min",
            Side::Max => "max",
        })
    }
}

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("no certificate exists at the requested margin{}", .failing.map(|(k, s)| format!(" (failing block: bus {k} {s})")).unwrap_or_default())]
    NoCertificate { failing: Option<(usize, Side)> },
    #[error("the admissible operating region is certified empty")]
    EmptyRegion,
    #[error("solver trouble: {0}")]
    NumericalTrouble(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
}

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("result invariant violated: {0}")]
    Invariant(String),
    #[error("certificate for bus {bus} {side} fails: {reason}")]
    Certificate { bus: usize, side: Side, reason: String },
    #[error("sample {sample} has |v_{bus}|^2 = {value} outside [{lower}, {upper}]")]
    Containment { bus: usize, sample: usize, value: f64, lower: f64, upper: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("ellipsoid shape is not positive definite")]
    Singular,
    #[error("center has length {center} but shape is {shape}x{shape}")]
    DimensionMismatch { center: usize, shape: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum PfError {
    #[error("power-flow Jacobian is singular")]
    Singular,
    #[error("power flow did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("injection vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvelopeError {
    #[error("every sample was rejected ({non_convergent} non-convergent, {current_violating} over current limits)")]
    Empty { non_convergent: usize, current_violating: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}
