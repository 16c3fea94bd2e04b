use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("overlapping spans in one layer: {first:?} and {second:?}")]
    OverlappingSpans {
        first: (usize, usize, String),
        second: (usize, usize, String),
    },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("span ({start}, {end}) out of range for document with {n_tokens} tokens")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        n_tokens: usize,
    },
    #[error("gazetteer entries must contain at least one token")]
    EmptyEntry,
    #[error("external label `{0}` has no mapping")]
    UnmappedLabel(String),
    #[error("missing layer `{layer}`{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    MissingLayer {
        layer: String,
        context: Option<String>,
    },
    #[error("dependency cycle among labelling functions: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("gamma must be non-negative, got {0}")]
    NegativeGamma(f64),
    #[error("corpus contains no documents")]
    EmptyCorpus,
    #[error("operation requires {expected} mode")]
    ModeMismatch { expected: &'static str },
    #[error("no gold annotations available for scoring")]
    NoGold,
    #[error("labelling function `{lf}` voted for conflicting classes `{first}` and `{second}`")]
    ConflictingClassVotes {
        lf: String,
        first: String,
        second: String,
    },
    #[error("invalid label space: {0}")]
    InvalidLabelSpace(String),
    #[error("invalid document `{doc_id}`: {reason}")]
    InvalidDocument { doc_id: String, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid regex `{pattern}`")]
    Regex {
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}")]
    Json {
        location: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}", path.display())]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from configuration (flags, config files, model
    /// files) rather than from the data being processed.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidLabelSpace(_)
                | Error::InvalidConfig(_)
                | Error::CycleDetected(_)
                | Error::NegativeGamma(_)
                | Error::Regex { .. }
                | Error::Toml { .. }
                | Error::UnsupportedVersion(_)
                | Error::InvalidParams(_)
                | Error::EmptyEntry
        )
    }
}
