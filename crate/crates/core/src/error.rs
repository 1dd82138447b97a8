//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("network must contain at least one player")]
    EmptyNetwork,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("requested {requested} neighbors but only {available} other players exist")]
    InsufficientPlayers { requested: usize, available: usize },

    #[error("destination assignment infeasible: {0}")]
    AssignmentInfeasible(String),

    #[error("unreachable destination: direct gain must be positive, got {gain}")]
    UnreachableDestination { gain: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("profiles differ at player {at} but only player {actor} may act")]
    InvalidTransition { actor: usize, at: usize },

    #[error("player {player} is not a deviator; expected drift is undefined")]
    NotADeviator { player: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("instance too large to enumerate: {channels}^{players} profiles exceeds {limit}")]
    InstanceTooLarge {
        channels: usize,
        players: usize,
        limit: u64,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("figure/result shape mismatch: {0}")]
    FigureShape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
