use thiserror::Error;

use crate::distill::DistillationReport;

pub type Result<T> = std::result::Result<T, QkdError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QkdError {
    /// A numeric argument lies outside the range where the model is defined.
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// A configuration record failed validation; `field` names the offending entry.
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    /// Parity error correction ran out of key before reaching the target error.
    #[error(
        "error correction exhausted the key after {} rounds (length {}, estimated error {:.3e})",
        .report.rounds, .report.final_length, .report.residual_error
    )]
    CorrectionFailed { report: Box<DistillationReport> },
}

impl QkdError {
    pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Self {
        QkdError::Domain {
            name,
            value,
            domain,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        QkdError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Checks `lo <= value <= hi` (NaN fails).
pub(crate) fn check_closed(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    domain: &'static str,
) -> Result<f64> {
    if value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(QkdError::domain(name, value, domain))
    }
}
