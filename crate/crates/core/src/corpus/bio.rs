//! BIO bridging between span layers and token-level tag sequences.

use super::document::Span;
use super::labels::{LabelId, LabelSpace, LatentState, Mode, ObservedSymbol};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    Outside,
    Begin(LabelId),
    Inside(LabelId),
}

impl BioTag {
    /// Observed-symbol view: uncovered positions become VOID.
    pub fn observed(self) -> ObservedSymbol {
        match self {
            BioTag::Outside => ObservedSymbol::Void,
            BioTag::Begin(x) => ObservedSymbol::Begin(x),
            BioTag::Inside(x) => ObservedSymbol::Inside(x),
        }
    }

    /// Latent-state view; `None` when the label is underspecified.
    pub fn latent(self, space: &LabelSpace) -> Option<LatentState> {
        match self {
            BioTag::Outside => Some(LatentState::Outside),
            BioTag::Begin(c) if space.is_concrete(c) => Some(LatentState::Begin(c)),
            BioTag::Inside(c) if space.is_concrete(c) => Some(LatentState::Inside(c)),
            _ => None,
        }
    }

    pub fn label(self) -> Option<LabelId> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(x) | BioTag::Inside(x) => Some(x),
        }
    }

    /// VOID reads as outside; a class symbol as a one-position span start.
    pub fn from_observed(symbol: ObservedSymbol) -> BioTag {
        match symbol {
            ObservedSymbol::Void => BioTag::Outside,
            ObservedSymbol::Begin(x) | ObservedSymbol::Class(x) => BioTag::Begin(x),
            ObservedSymbol::Inside(x) => BioTag::Inside(x),
        }
    }

    pub fn from_latent(state: LatentState) -> BioTag {
        match state {
            LatentState::Outside => BioTag::Outside,
            LatentState::Begin(c) => BioTag::Begin(c),
            LatentState::Inside(c) => BioTag::Inside(c),
            LatentState::Class(c) => BioTag::Begin(c),
        }
    }
}

/// Checks spans against a document length and returns them sorted, failing on
/// the first overlapping pair.
pub fn check_spans(spans: &[Span], n_tokens: usize) -> Result<Vec<&Span>> {
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort();
    for s in &sorted {
        if s.start >= s.end || s.end > n_tokens {
            return Err(Error::SpanOutOfRange {
                start: s.start,
                end: s.end,
                n_tokens,
            });
        }
    }
    for pair in sorted.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(Error::OverlappingSpans {
                first: pair[0].triple(),
                second: pair[1].triple(),
            });
        }
    }
    Ok(sorted)
}

/// Encodes non-overlapping spans as a BIO tag sequence of length `n_tokens`.
pub fn encode_bio(spans: &[Span], n_tokens: usize, space: &LabelSpace) -> Result<Vec<BioTag>> {
    if space.mode() != Mode::Sequence {
        return Err(Error::ModeMismatch { expected: "sequence" });
    }
    let sorted = check_spans(spans, n_tokens)?;
    let mut tags = vec![BioTag::Outside; n_tokens];
    for span in sorted {
        let id = space.require_label(&span.label)?;
        tags[span.start] = BioTag::Begin(id);
        for t in &mut tags[span.start + 1..span.end] {
            *t = BioTag::Inside(id);
        }
    }
    Ok(tags)
}

/// Decodes a BIO tag sequence into spans. An `I-X` that does not continue a
/// run of label X opens a new span, as if it were `B-X`; the number of such
/// repairs is returned alongside the spans.
pub fn decode_bio(tags: &[BioTag], space: &LabelSpace) -> (Vec<Span>, usize) {
    let mut spans = Vec::new();
    let mut repairs = 0;
    let mut open: Option<(usize, LabelId)> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            BioTag::Outside => {
                if let Some((s, l)) = open.take() {
                    spans.push(Span::new(s, i, space.label_name(l)));
                }
            }
            BioTag::Begin(l) => {
                if let Some((s, prev)) = open.take() {
                    spans.push(Span::new(s, i, space.label_name(prev)));
                }
                open = Some((i, l));
            }
            BioTag::Inside(l) => match open {
                Some((_, prev)) if prev == l => {}
                _ => {
                    if let Some((s, prev)) = open.take() {
                        spans.push(Span::new(s, i, space.label_name(prev)));
                    }
                    repairs += 1;
                    open = Some((i, l));
                }
            },
        }
    }
    if let Some((s, l)) = open {
        spans.push(Span::new(s, tags.len(), space.label_name(l)));
    }
    (spans, repairs)
}

/// Decodes a sequence of latent state indices into spans.
pub fn decode_states(states: &[usize], space: &LabelSpace) -> (Vec<Span>, usize) {
    let tags: Vec<BioTag> = states.iter().map(|&s| BioTag::from_latent(space.state(s))).collect();
    decode_bio(&tags, space)
}

/// Whether `next` may follow `prev` in a BIO sequence (`prev = None` at the
/// first token).
pub fn valid_transition(prev: Option<LatentState>, next: LatentState) -> bool {
    match next {
        LatentState::Inside(c) => matches!(prev, Some(LatentState::Begin(p) | LatentState::Inside(p)) if p == c),
        _ => true,
    }
}
