//! Labelling functions and the pipeline that applies them.

mod config;
mod doclevel;
mod external;
mod pipeline;
mod predicate;
mod rules;
mod trie;

pub use config::{LfConfig, LfDecl, LfKind};
pub use doclevel::{doc_first_mention, doc_majority};
pub use external::{ingest_external, PredictionRecord, Predictions};
pub use pipeline::{neighborhoods, run_pipeline, Annotator, LabellingFunction, Pipeline};
pub use predicate::{Flag, Pattern, TokenPredicate};
pub use rules::{apply_neighbour_rule, apply_regex_rule, apply_token_rule};
pub use trie::{casefold, CaseMode, GazetteerTrie};
