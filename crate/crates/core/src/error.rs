use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ring configuration: {0}")]
    InvalidRing(String),

    #[error("value {value} outside fixed-point range (|x| < {bound})")]
    Overflow { value: f64, bound: f64 },

    #[error("PRF seed reuse: counter {counter} already consumed (next fresh counter is {next})")]
    SeedReuse { counter: u64, next: u64 },

    #[error("PRF seed belongs to a different key")]
    SeedKeyMismatch,

    #[error("mismatched shares: {0}")]
    MismatchedShares(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient dealer material: {0}")]
    Exhausted(String),

    #[error("correlated randomness reused: {0}")]
    Reuse(String),

    #[error("channel failure: {0}")]
    Channel(String),

    #[error("malformed frame: {0}")]
    Frame(String),

    #[error("protocol desync: {0}")]
    Desync(String),

    #[error("handshake mismatch: {0}")]
    Handshake(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dealer file: {0}")]
    DealerFile(String),

    #[error("embedding data: {0}")]
    Embedding(String),

    #[error("linear system is rank deficient or ill-conditioned (condition estimate {cond:e})")]
    RankDeficient { cond: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Configuration problems are the operator's fault; everything else aborts the protocol.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidRing(_)
                | Error::Overflow { .. }
                | Error::Config(_)
                | Error::DealerFile(_)
                | Error::Embedding(_)
                | Error::DimensionMismatch(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Io(_)
        )
    }
}
