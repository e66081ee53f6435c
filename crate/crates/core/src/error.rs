use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown loss `{0}`")]
    UnknownLoss(String),
    #[error("loss `{name}` does not support n = {n}")]
    UnsupportedClassCount { name: &'static str, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProb(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("value {value} outside link range, nearest endpoint {nearest}")]
    OutOfRange { value: f64, nearest: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("evaluation failed at {at}: {msg}")]
    Evaluation { at: f64, msg: String },
    #[error("generalized prediction {0:?} lies outside the super-prediction set")]
    NotSuperPrediction(Vec<f64>),
    #[error("all expert weights vanished")]
    ZeroMass,
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("solver: {0}")]
    Solver(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failing computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::UnknownLoss(_)
            | Error::UnsupportedClassCount { .. }
            | Error::Dimension { .. }
            | Error::InvalidProb(_)
            | Error::InvalidArgument(_)
            | Error::OutOfRange { .. }
            | Error::Parse { .. } => true,
            Error::Round { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
