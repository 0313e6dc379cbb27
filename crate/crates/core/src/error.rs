use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("cannot read {path}")]
    Read { path: PathBuf, source: io::Error },

    #[error("invalid format descriptor: {0}")]
    Format(String),

    #[error("header does not provide required column {0:?}")]
    MissingColumn(String),

    #[error("cannot determine trading date for {0}")]
    MissingDate(String),

    #[error("timestamp {0} lies outside 04:00-20:00")]
    OutOfSession(String),

    #[error("invalid detection criteria: {0}")]
    InvalidCriteria(String),

    #[error("undefined relative spread: ask {0} is not positive")]
    UndefinedSpread(String),

    #[error("crossed quote: bid {bid} above ask {ask}")]
    CrossedQuote { bid: String, ask: String },

    #[error("no eligible quote at or before the event start")]
    AnchorMissing,

    #[error("no complete spread window to average")]
    EmptyProfile,

    #[error("invalid baseline parameters: {0}")]
    InvalidBaseline(String),

    #[error("invalid plant specification: {0}")]
    InvalidPlant(String),

    #[error("plant overlaps an existing planted event")]
    PlantOverlap,

    #[error("generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: u32, reason: String },

    #[error("event {0} does not match the supplied trade stream")]
    EventMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
