//! Weak supervision for token sequences and documents.
//!
//! Labelling functions (rules, gazetteers, external model predictions and
//! document-level consistency functions) annotate a tokenized corpus with one
//! span layer each. The layers are aggregated by a hidden Markov model whose
//! per-function emissions are tempered to discount redundant functions. For
//! classification the model reduces to Naive Bayes.

pub mod aggregation;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod lf;
pub mod synth;

pub use error::{Error, Result};
