//! Ingestion of predictions produced outside the process (ML models, parsers).

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Span};
use crate::error::{Error, Result};

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    #[serde(default)]
    pub spans: Vec<Span>,
}

/// Predictions keyed by document id. Documents without a record get no spans.
#[derive(Debug, Clone, Default)]
pub struct Predictions {
    by_doc: HashMap<String, Vec<Span>>,
}

impl Predictions {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut by_doc: HashMap<String, Vec<Span>> = HashMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| Error::Json {
                location: format!("{}:{}", path.display(), lineno + 1),
                source: e,
            })?;
            by_doc.entry(rec.doc_id).or_default().extend(rec.spans);
        }
        Ok(Predictions { by_doc })
    }

    pub fn from_records(records: impl IntoIterator<Item = PredictionRecord>) -> Self {
        let mut by_doc: HashMap<String, Vec<Span>> = HashMap::new();
        for rec in records {
            by_doc.entry(rec.doc_id).or_default().extend(rec.spans);
        }
        Predictions { by_doc }
    }

    pub fn get(&self, doc_id: &str) -> &[Span] {
        self.by_doc.get(doc_id).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Relabels external spans through `label_map`, checking them against `doc`.
pub fn ingest_external(doc: &Document, predictions: &[Span], label_map: &BTreeMap<String, String>) -> Result<Vec<Span>> {
    let n = doc.tokens.len();
    predictions
        .iter()
        .map(|s| {
            if s.start >= s.end || s.end > n {
                return Err(Error::SpanOutOfRange {
                    start: s.start,
                    end: s.end,
                    n_tokens: n,
                });
            }
            let label = label_map
                .get(&s.label)
                .ok_or_else(|| Error::UnmappedLabel(s.label.clone()))?;
            Ok(Span::new(s.start, s.end, label.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> BTreeMap<String, String> {
        [("LOC", "LOC_COARSE"), ("PER", "PERSON")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn relabels() {
        let doc = Document::from_whitespace("d", "Oslo is cold");
        let out = ingest_external(&doc, &[Span::new(0, 1, "LOC")], &map()).unwrap();
        assert_eq!(out, vec![Span::new(0, 1, "LOC_COARSE")]);
        assert!(ingest_external(&doc, &[], &map()).unwrap().is_empty());
    }

    #[test]
    fn errors() {
        let doc = Document::from_whitespace("d", "Oslo is cold");
        match ingest_external(&doc, &[Span::new(0, 1, "FOO")], &map()) {
            Err(Error::UnmappedLabel(l)) => assert_eq!(l, "FOO"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ingest_external(&doc, &[Span::new(2, 4, "LOC")], &map()),
            Err(Error::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.jsonl");
        std::fs::write(&path, "{\"doc_id\":\"a\",\"spans\":[[0,1,\"LOC\"]]}\n\n{\"doc_id\":\"b\",\"spans\":[]}\n").unwrap();
        let p = Predictions::load(&path).unwrap();
        assert_eq!(p.get("a"), &[Span::new(0, 1, "LOC")]);
        assert!(p.get("b").is_empty());
        assert!(p.get("missing").is_empty());
    }
}
