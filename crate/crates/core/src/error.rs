use std::path::PathBuf;

use crate::types::AgeGroup;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{table} row {row}: {message}")]
    MalformedRow {
        table: &'static str,
        row: usize,
        message: String,
    },

    #[error("{table}: missing column `{column}`")]
    MissingColumn { table: &'static str, column: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("cannot fit {components} components to {points} data points")]
    TooFewPoints { points: usize, components: usize },

    #[error("no mixture model for populated age group {0}")]
    MissingModel(AgeGroup),

    #[error("edge probability {probability} exceeds 1 in block ({from}, {to}); population too small for this density")]
    ProbabilityOverflow {
        from: AgeGroup,
        to: AgeGroup,
        probability: f64,
    },

    #[error("age composition mismatch in group {age}: data has {data}, model sample has {model}")]
    CompositionMismatch {
        age: AgeGroup,
        data: usize,
        model: usize,
    },

    #[error("age group {age} has {available} nodes, {requested} requested")]
    InsufficientNodes {
        age: AgeGroup,
        available: usize,
        requested: usize,
    },

    #[error("network has no edges")]
    EmptyNetwork,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
