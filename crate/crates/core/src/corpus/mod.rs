//! Documents, span layers, the label space and BIO encoding.

mod bio;
mod document;
mod labels;

pub use bio::{check_spans, decode_bio, decode_states, encode_bio, valid_transition, BioTag};
pub use document::{read_corpus, write_corpus, Document, Gold, Span, Token};
pub use labels::{
    LabelId, LabelSpace, LabelSpaceDecl, LatentState, Mode, ObservedSymbol, OUTSIDE, VOID,
};
