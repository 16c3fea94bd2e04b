//! Document-level labelling functions built on another function's layer.
//! Mentions are grouped by their case-folded surface string.

use std::collections::BTreeMap;

use super::trie::casefold;
use crate::corpus::{Document, Span};
use crate::error::Result;

fn mention_groups<'a>(doc: &Document, spans: &'a [Span]) -> BTreeMap<String, Vec<&'a Span>> {
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort();
    let mut groups: BTreeMap<String, Vec<&Span>> = BTreeMap::new();
    for s in sorted {
        groups.entry(casefold(&doc.surface(s.start, s.end))).or_default().push(s);
    }
    groups
}

/// Relabels every mention of a repeated surface string with the group's
/// majority label. Groups with a tied majority are left out.
pub fn doc_majority(doc: &Document, source_layer: &str) -> Result<Vec<Span>> {
    let source = doc.require_layer(source_layer)?;
    let mut out = Vec::new();
    for group in mention_groups(doc, source).values() {
        if group.len() < 2 {
            continue;
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in group {
            *counts.entry(s.label.as_str()).or_default() += 1;
        }
        let best = counts.values().copied().max().unwrap_or(0);
        let mut winners = counts.iter().filter(|(_, &c)| c == best);
        let (Some((label, _)), None) = (winners.next(), winners.next()) else {
            continue;
        };
        out.extend(group.iter().map(|s| Span::new(s.start, s.end, *label)));
    }
    out.sort();
    Ok(out)
}

/// Labels every later mention of a surface string with the label of its first
/// mention.
pub fn doc_first_mention(doc: &Document, source_layer: &str) -> Result<Vec<Span>> {
    let source = doc.require_layer(source_layer)?;
    let mut out = Vec::new();
    for group in mention_groups(doc, source).values() {
        let first = &group[0].label;
        out.extend(group[1..].iter().map(|s| Span::new(s.start, s.end, first.clone())));
    }
    out.sort();
    Ok(out)
}
