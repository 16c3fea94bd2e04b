//! Aggregation of labelling-function layers into a single layer.

mod hmm;
pub mod lattice;
mod majority;
mod model_file;
mod observations;
mod params;
mod weights;

pub use hmm::{emission_logscore, fit, structured_chain, DecodeMode, Decoded, EmissionTable, FitReport, HmmModel, TraceEntry};
pub use lattice::{Chain, Posteriors};
pub use majority::majority_vote;
pub use model_file::{ModelFile, RosterEntry, FORMAT_NAME, FORMAT_VERSION};
pub use observations::{build_corpus_observations, build_observations, ObservationMatrix};
pub use params::{init_from_majority, FitOptions, HmmParams};
pub use weights::{compute_recall, compute_weights, RecallTensor};
