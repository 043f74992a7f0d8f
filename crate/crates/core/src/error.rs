use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("inconsistent state: {0}")]
    Consistency(String),

    #[error("invalid data at {location}: {reason}")]
    Data { location: String, reason: String },

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no compatibility space trained for type pair ({0}, {1})")]
    UnseenTypePair(usize, usize),

    #[error("non-finite loss at step {step}: comp={comp}, vsim={vsim}, tsim={tsim}, vse={vse}")]
    NonFiniteLoss {
        step: u64,
        comp: f64,
        vsim: f64,
        tsim: f64,
        vse: f64,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn data(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Data {
            location: location.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
