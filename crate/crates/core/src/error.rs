use thiserror::Error;

/// Errors raised by the simulator.
///
/// `field` names the offending parameter using the same dotted path as the
/// JSON configuration (e.g. `geometry.length_m`) so that front ends can report
/// it verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error(
        "interaction window [{start:e}, {end:e}] s lies outside the waveform span [{span_start:e}, {span_end:e}] s"
    )]
    WindowOutOfBounds {
        start: f64,
        end: f64,
        span_start: f64,
        span_end: f64,
    },

    #[error("series is empty")]
    EmptySeries,

    #[error("series has zero mean; normalized deviation is undefined")]
    ZeroMean,

    #[error("amplitude scan failed: {0}")]
    ScanBracket(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Prefix the field path of an `InvalidParameter` error.
    pub fn in_field(self, prefix: &str) -> Self {
        match self {
            Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                field: format!("{prefix}.{field}"),
                reason,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {value}")))
    }
}
