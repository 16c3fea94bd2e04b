use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Character offset of the first character in the document text.
    pub start: usize,
    /// Character offset one past the last character.
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
}

fn is_currency_char(c: char) -> bool {
    matches!(c,
        '$' | '¢' | '£' | '¤' | '¥' | '֏' | '؋' | '৲' | '৳' | '৻' | '૱' | '௹' | '฿' | '៛'
        | '\u{20A0}'..='\u{20C0}' | '꠸' | '﷼' | '﹩' | '＄' | '￠' | '￡' | '￥' | '￦')
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        Token {
            text: text.into(),
            start,
            end,
            pos: None,
            lemma: None,
        }
    }

    pub fn with_pos(mut self, pos: impl Into<String>) -> Self {
        self.pos = Some(pos.into());
        self
    }

    pub fn with_lemma(mut self, lemma: impl Into<String>) -> Self {
        self.lemma = Some(lemma.into());
        self
    }

    /// Title case in the Python `str.istitle` sense: at least one cased
    /// character, uppercase only at the start of a cased run.
    pub fn is_title(&self) -> bool {
        let mut prev_cased = false;
        let mut any_cased = false;
        for c in self.text.chars() {
            if c.is_uppercase() {
                if prev_cased {
                    return false;
                }
                prev_cased = true;
                any_cased = true;
            } else if c.is_lowercase() {
                if !prev_cased {
                    return false;
                }
                prev_cased = true;
                any_cased = true;
            } else {
                prev_cased = false;
            }
        }
        any_cased
    }

    pub fn is_upper(&self) -> bool {
        let mut any = false;
        for c in self.text.chars() {
            if c.is_lowercase() {
                return false;
            }
            any |= c.is_uppercase();
        }
        any
    }

    pub fn is_lower(&self) -> bool {
        let mut any = false;
        for c in self.text.chars() {
            if c.is_uppercase() {
                return false;
            }
            any |= c.is_lowercase();
        }
        any
    }

    pub fn is_digit(&self) -> bool {
        !self.text.is_empty() && self.text.chars().all(char::is_numeric)
    }

    pub fn is_alpha(&self) -> bool {
        !self.text.is_empty() && self.text.chars().all(char::is_alphabetic)
    }

    pub fn is_punct(&self) -> bool {
        !self.text.is_empty() && self.text.chars().all(|c| c.is_ascii_punctuation())
    }

    pub fn is_currency(&self) -> bool {
        !self.text.is_empty() && self.text.chars().all(is_currency_char)
    }

    pub fn like_num(&self) -> bool {
        let t: String = self.text.chars().filter(|c| !matches!(c, ',' | '.')).collect();
        !t.is_empty() && t.chars().all(|c| c.is_ascii_digit())
    }
}

/// A labelled token range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize, String)", into = "(usize, usize, String)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Span {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub(crate) fn triple(&self) -> (usize, usize, String) {
        (self.start, self.end, self.label.clone())
    }
}

impl From<(usize, usize, String)> for Span {
    fn from((start, end, label): (usize, usize, String)) -> Self {
        Span { start, end, label }
    }
}

impl From<Span> for (usize, usize, String) {
    fn from(s: Span) -> Self {
        (s.start, s.end, s.label)
    }
}

/// Gold annotation: entity spans in sequence mode, a class label in
/// classification mode. Used for evaluation only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    Spans(Vec<Span>),
    Class(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub layers: BTreeMap<String, Vec<Span>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Gold>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, tokens: Vec<Token>) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
            tokens,
            layers: BTreeMap::new(),
            gold: None,
        }
    }

    /// Builds a document from whitespace-separated tokens, computing offsets.
    pub fn from_whitespace(doc_id: impl Into<String>, text: &str) -> Self {
        let mut tokens = Vec::new();
        let mut start = None;
        let mut n_chars = 0;
        for (i, c) in text.chars().enumerate() {
            n_chars = i + 1;
            if c.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push((s, i));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            tokens.push((s, n_chars));
        }
        let chars: Vec<char> = text.chars().collect();
        let tokens = tokens
            .into_iter()
            .map(|(s, e)| Token::new(chars[s..e].iter().collect::<String>(), s, e))
            .collect();
        Document::new(doc_id, text, tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn layer(&self, name: &str) -> Option<&[Span]> {
        self.layers.get(name).map(Vec::as_slice)
    }

    pub fn require_layer(&self, name: &str) -> Result<&[Span]> {
        self.layer(name).ok_or_else(|| Error::MissingLayer {
            layer: name.to_string(),
            context: Some(format!("document `{}`", self.doc_id)),
        })
    }

    pub fn set_layer(&mut self, name: impl Into<String>, mut spans: Vec<Span>) {
        spans.sort();
        self.layers.insert(name.into(), spans);
    }

    pub fn gold_spans(&self) -> Option<&[Span]> {
        match &self.gold {
            Some(Gold::Spans(s)) => Some(s),
            _ => None,
        }
    }

    pub fn gold_class(&self) -> Option<&str> {
        match &self.gold {
            Some(Gold::Class(c)) => Some(c),
            _ => None,
        }
    }

    /// Original text covered by a token range.
    pub fn surface(&self, start: usize, end: usize) -> String {
        if start >= end || end > self.tokens.len() {
            return String::new();
        }
        let from = self.tokens[start].start;
        let to = self.tokens[end - 1].end;
        self.text.chars().skip(from).take(to - from).collect()
    }

    fn invalid(&self, reason: String) -> Error {
        Error::InvalidDocument {
            doc_id: self.doc_id.clone(),
            reason,
        }
    }

    /// Checks token offsets and span ranges.
    pub fn validate(&self) -> Result<()> {
        let n_chars = self.text.chars().count();
        let mut prev_end = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.start >= tok.end {
                return Err(self.invalid(format!("token {i} has empty offsets")));
            }
            if tok.start < prev_end {
                return Err(self.invalid(format!("token {i} overlaps or precedes token {}", i.saturating_sub(1))));
            }
            if tok.end > n_chars {
                return Err(self.invalid(format!("token {i} ends beyond the text")));
            }
            prev_end = tok.end;
        }
        let n = self.tokens.len();
        let gold = self.gold_spans().into_iter().flatten();
        for span in self.layers.values().flatten().chain(gold) {
            if span.start >= span.end || span.end > n {
                return Err(Error::SpanOutOfRange {
                    start: span.start,
                    end: span.end,
                    n_tokens: n,
                });
            }
        }
        Ok(())
    }
}

/// Reads a newline-delimited JSON corpus, validating every document.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Json {
            location: format!("{}:{}", path.display(), lineno + 1),
            source: e,
        })?;
        doc.validate()?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(doc).map_err(|e| Error::Json {
            location: path.display().to_string(),
            source: e,
        })?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
