use thiserror::Error;

/// Errors raised across the pricing, calibration and risk modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("numeric failure: {message}")]
    Numeric {
        message: String,
        /// Last bracket `[lo, hi]` held by an iterative solver, when one applies.
        bracket: Option<(f64, f64)>,
    },

    #[error("ill-posed input: {0}")]
    IllPosed(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("arbitrage in constraints: {0}")]
    Arbitrage(String),

    #[error("support too small: {0}")]
    SupportTooSmall(String),

    #[error("quote {index}: {source}")]
    AtQuote {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            message: msg.into(),
            bracket: None,
        }
    }

    /// True for errors caused by the caller's inputs rather than by a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Io(_) | Error::Parse(_) => true,
            Error::AtQuote { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
