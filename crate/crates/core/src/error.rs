use thiserror::Error;

/// Errors produced by profile construction, transforms and the solver.
#[derive(Debug, Error)]
pub enum ChError {
    /// Wave parameters violate the root ordering required by the family.
    #[error("parameter ordering violation: {0}")]
    OrderingViolation(String),

    /// Plateau insertion requires the integration constant to equal s^2.
    #[error("stumpon inadmissible: a = {a} but s^2 = {s_sq} (plateau half-width {ell})")]
    StumponInadmissible { a: f64, s_sq: f64, ell: f64 },

    /// An adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    QuadratureNonconvergent(String),

    /// A function expected to be monotone was not.
    #[error("non-monotone data: {0}")]
    NonMonotonic(String),

    /// Mismatched periodic/line domains or inconsistent sample spans.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// Characteristic positions decreased beyond tolerance.
    #[error("y decreases by {max_drop:.3e} at label index {index}")]
    NonMonotonicY { max_drop: f64, index: usize },

    /// An operation that requires an absolutely continuous measure saw atoms.
    #[error("measure carries {count} atom(s); operation requires an absolutely continuous measure")]
    AtomsPresent { count: usize },

    /// Requested time step exceeds the stability bound.
    #[error("time step {dt:.3e} exceeds the CFL bound {dt_max:.3e}")]
    CflViolation { dt: f64, dt_max: f64 },

    /// A state stopped being finite during time integration.
    #[error("non-finite state detected at t = {t}")]
    BlowUp { t: f64 },

    /// A label that must lie on the plateau does not.
    #[error("label xi = {xi} is outside the plateau interval |xi| < {bound}")]
    OffPlateau { xi: f64, bound: f64 },

    /// An argument lies outside the admissible range.
    #[error("argument out of range: {0}")]
    OutOfRange(String),

    /// File reading or writing failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A data file did not match the expected format.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, ChError>;
