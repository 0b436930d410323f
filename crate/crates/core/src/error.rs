use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// `n < 2`.
    InvalidDimension {
        n: u32,
    },
    /// `alpha <= 1/n`, `beta < 0`, or a non-finite exponent.
    InvalidExponent {
        name: &'static str,
        value: f64,
    },
    /// Grid machinery is planar; other dimensions only work for the closed-form algebra.
    UnsupportedDimension {
        n: u32,
    },
    DegenerateGeometry(String),
    DomainMismatch,
    NoConvergence {
        iterations: usize,
        residual: f64,
    },
    LostConvexity {
        defect: f64,
        tol: f64,
    },
    ShootingFailed(String),
    StabilityFailure {
        t: f64,
        dt: f64,
    },
    /// The step budget ran out before the end time.
    StepLimit {
        steps: usize,
        t: f64,
    },
    EnvelopeUndefined(String),
    InsufficientSamples {
        found: usize,
        needed: usize,
    },
    AsymmetricDomain,
    CaseUndefined {
        s: f64,
        alpha: f64,
    },
    SingularMatrix {
        row: usize,
    },
    InvalidOption(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension { n } => write!(f, "InvalidDimension: n = {n} (need n >= 2)"),
            Error::InvalidExponent { name, value } => {
                write!(f, "InvalidExponent: {name} = {value}")
            }
            Error::UnsupportedDimension { n } => {
                write!(
                    f,
                    "UnsupportedDimension: grid operators are planar, got n = {n}"
                )
            }
            Error::DegenerateGeometry(msg) => write!(f, "DegenerateGeometry: {msg}"),
            Error::DomainMismatch => write!(f, "DomainMismatch: fields live on different domains"),
            Error::NoConvergence {
                iterations,
                residual,
            } => write!(
                f,
                "NoConvergence: residual {residual:e} after {iterations} iterations"
            ),
            Error::LostConvexity { defect, tol } => {
                write!(
                    f,
                    "LostConvexity: defect {defect:e} exceeds tolerance {tol:e}"
                )
            }
            Error::ShootingFailed(msg) => write!(f, "ShootingFailed: {msg}"),
            Error::StabilityFailure { t, dt } => {
                write!(f, "StabilityFailure: dt = {dt:e} below minimum at t = {t}")
            }
            Error::StepLimit { steps, t } => {
                write!(f, "StepLimit: {steps} steps reached at t = {t}")
            }
            Error::EnvelopeUndefined(msg) => write!(f, "EnvelopeUndefined: {msg}"),
            Error::InsufficientSamples { found, needed } => {
                write!(
                    f,
                    "InsufficientSamples: {found} usable samples, need {needed}"
                )
            }
            Error::AsymmetricDomain => {
                write!(f, "AsymmetricDomain: mask lacks the requested symmetry")
            }
            Error::CaseUndefined { s, alpha } => {
                write!(
                    f,
                    "CaseUndefined: no bound applies at s = {s}, alpha = {alpha}"
                )
            }
            Error::SingularMatrix { row } => write!(f, "SingularMatrix: zero pivot at row {row}"),
            Error::InvalidOption(msg) => write!(f, "InvalidOption: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
