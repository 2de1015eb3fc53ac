use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid equivalence interval: {0}")]
    InvalidInterval(String),
    #[error("invalid dose outcome: {dlt} DLTs among {treated} patients")]
    InvalidOutcome { treated: u32, dlt: u32 },
    #[error("no patients treated at the current dose; no observed rate is defined")]
    NoPatients,
    #[error("dose {value} is outside 1..={total}")]
    InvalidDose { value: usize, total: usize },
    #[error("3+3 decisions require 3 or 6 patients at the dose, got {0}")]
    ThreePlusThreeCount(u32),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("posterior grid underflow: every grid mass is zero")]
    GridUnderflow,
    #[error("unknown design `{name}`; valid designs: {valid}")]
    UnknownDesign { name: String, valid: String },
    #[error("design `{0}` has no fixed decision table")]
    NoStaticTable(String),
    #[error("no default CRM skeleton for target {0}; supply one explicitly")]
    NoDefaultSkeleton(f64),
    #[error("scenario file: {0}")]
    ScenarioFormat(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
