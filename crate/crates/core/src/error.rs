use thiserror::Error;

/// Errors raised across the simulator and the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pilot length {pilot_len} is shorter than the number of users {users}")]
    PilotTooShort { pilot_len: usize, users: usize },

    #[error("degenerate quantization grid: every sample is zero")]
    DegenerateGrid,

    #[error("no histogram bin passed the peak threshold")]
    EmptyAlphabet,

    #[error("alphabet has {0} point(s); at least two are required")]
    DegenerateAlphabet(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("signal collapsed after {restarts} restart(s)")]
    ExtractionCollapsed { restarts: usize },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("true channel has zero energy")]
    ZeroChannel,

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
