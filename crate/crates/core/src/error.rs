use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite derivative with respect to input {index}")]
    NonFiniteDerivative { index: usize },

    #[error("non-finite residual at row {row}")]
    NonFiniteResidual { row: usize },

    #[error("invalid regularization: {0}")]
    InvalidRegularization(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("result is not optimal")]
    NotOptimal,

    #[error("singular Riccati step at stage {stage}")]
    SingularRiccatiStep { stage: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
