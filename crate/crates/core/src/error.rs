use thiserror::Error;

use crate::pmf::PmfError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rational literal {0:?}")]
    InvalidRational(String),

    #[error("malformed system document: {0}")]
    Schema(String),

    #[error("context `{context}`: {source}")]
    Pmf {
        context: String,
        #[source]
        source: PmfError,
    },

    #[error("context `{context}`: outcome {label:?} is not in the alphabet of content `{content}`")]
    UnknownOutcome {
        content: String,
        context: String,
        label: String,
    },

    #[error("content `{content}` appears twice in context `{context}`")]
    DuplicateIncidence { content: String, context: String },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("context `{0}` measures no contents")]
    EmptyContext(String),

    #[error("content `{0}` is not measured in any context")]
    UnmeasuredContent(String),

    #[error("content `{0}` must have an alphabet of at least two distinct outcomes")]
    Alphabet(String),

    #[error("unknown content `{0}`")]
    UnknownContent(String),

    #[error("unknown context `{0}`")]
    UnknownContext(String),

    #[error("contents {subset:?} are not all measured in context `{context}`")]
    NotSubset { subset: Vec<String>, context: String },

    #[error("distributions are over different alphabets ({left:?} vs {right:?})")]
    AlphabetMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("correlation {0} lies outside [-1, 1]")]
    CorrelationOutOfRange(String),

    #[error("problem size {size} exceeds the guard of {limit}")]
    SizeGuard { size: u128, limit: u128 },

    #[error("witness does not match the system: {0}")]
    WitnessShape(String),

    #[error("invalid witness document: {0}")]
    Witness(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
