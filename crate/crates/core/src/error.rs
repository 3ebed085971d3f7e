use std::path::PathBuf;

use crate::netgraph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid network: {} violation(s), first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidNetwork(Vec<Violation>),

    #[error("xml error at line {line}: {message}")]
    Xml { line: usize, message: String },

    #[error("unknown edge `{0}`")]
    UnknownEdge(String),

    #[error("no route from `{from}` to `{to}`")]
    Unreachable { from: String, to: String },

    #[error("no routable edge pair found after {attempts} attempts")]
    GenerationExhausted { attempts: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("O-format error: {0}")]
    OdFormat(String),

    #[error("invalid time window: begin {begin} >= end {end}")]
    Window { begin: f64, end: f64 },

    #[error("invalid value at line {line}: {message}")]
    Value { line: usize, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown TAZ `{0}`")]
    UnknownTaz(String),

    #[error("TAZ `{0}` has no edges")]
    EmptyZone(String),

    #[error("no cost for edge `{0}`")]
    MissingCost(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for {len} alternatives")]
    InvalidIndex { index: usize, len: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { message: String, line: Option<usize> },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("step {index} ({name}) failed: {source}")]
    Step {
        index: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            message: message.into(),
            line: None,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}
