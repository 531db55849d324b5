use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("income vector must hold at least one agent")]
    EmptyIncome,

    #[error("income of agent {index} is {value}; incomes must be finite and non-negative")]
    InvalidIncome { index: usize, value: f64 },

    #[error("growth factor of agent {index} is {value}; draws must be finite and positive")]
    InvalidEta { index: usize, value: f64 },

    #[error("expected {expected} growth factors, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{name} = {value} lies outside [0, 1]")]
    RateOutOfRange { name: &'static str, value: f64 },

    #[error("invalid eta distribution: {0}")]
    InvalidSpec(String),

    #[error("border case {case} does not apply: {reason}")]
    BorderCase { case: u8, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("surfaces are not comparable: {0}")]
    GridMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("corrupt checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },

    #[error("degenerate result: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 1 invalid input, 2 I/O, 3 degenerate results.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } | Error::Checkpoint { .. } => 2,
            Error::Degenerate(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
