use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcaError {
    /// A parameter lies outside its admissible domain.
    #[error("parameter `{field}` out of domain: {value} ({reason})")]
    Domain {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Operand dimensions do not fit together.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// The requested system is larger than the backend supports.
    #[error("capacity exceeded: {what} = {requested} (max {max})")]
    Capacity {
        what: &'static str,
        requested: usize,
        max: usize,
    },

    /// A numerical kernel failed or produced an inadmissible value.
    #[error("numerical failure{}: {message}", site.map(|s| format!(" at site {s}")).unwrap_or_default())]
    Numerical {
        site: Option<usize>,
        message: String,
    },

    /// The state has (numerically) zero trace, so normalized observables are undefined.
    #[error("degenerate state: {0}")]
    Degenerate(String),

    /// Critical-point or exponent estimation could not be carried out.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Reading or writing a serialized artifact failed.
    #[error("i/o error: {0}")]
    Io(String),

    /// A serialized artifact could not be parsed.
    #[error("malformed input: {0}")]
    Format(String),
}

impl From<std::io::Error> for QcaError {
    fn from(e: std::io::Error) -> Self {
        QcaError::Io(e.to_string())
    }
}

impl From<csv::Error> for QcaError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            QcaError::Io(e.to_string())
        } else {
            QcaError::Format(e.to_string())
        }
    }
}

pub type Result<T, E = QcaError> = std::result::Result<T, E>;

pub(crate) fn check_probability(field: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(QcaError::Domain {
            field,
            value,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(value)
}
