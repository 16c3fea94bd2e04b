//! Token-level trie for multi-token gazetteer lookup.
//!
//! Token strings are interned into integer keys; edges live in a single hash
//! table keyed by `(node, token)`, which keeps million-entry gazetteers compact.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseMode {
    #[default]
    Sensitive,
    Insensitive,
}

pub fn casefold(s: &str) -> String {
    caseless::default_case_fold_str(s)
}

#[derive(Debug, Clone)]
pub struct GazetteerTrie {
    case_mode: CaseMode,
    label: String,
    keys: HashMap<Box<str>, u32>,
    edges: HashMap<u64, u32>,
    terminal: Vec<bool>,
    n_entries: usize,
    max_depth: usize,
}

const ROOT: u32 = 0;

#[inline]
fn edge_key(node: u32, key: u32) -> u64 {
    ((node as u64) << 32) | key as u64
}

impl GazetteerTrie {
    pub fn new(label: impl Into<String>, case_mode: CaseMode) -> Self {
        GazetteerTrie {
            case_mode,
            label: label.into(),
            keys: HashMap::new(),
            edges: HashMap::new(),
            terminal: vec![false],
            n_entries: 0,
            max_depth: 0,
        }
    }

    pub fn with_entries<I, E, S>(label: impl Into<String>, case_mode: CaseMode, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut trie = GazetteerTrie::new(label, case_mode);
        for entry in entries {
            let tokens: Vec<S> = entry.into_iter().collect();
            trie.insert(&tokens)?;
        }
        Ok(trie)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn case_mode(&self) -> CaseMode {
        self.case_mode
    }

    /// Number of distinct entries (terminal nodes).
    pub fn len(&self) -> usize {
        self.n_entries
    }

    pub fn is_empty(&self) -> bool {
        self.n_entries == 0
    }

    pub fn n_nodes(&self) -> usize {
        self.terminal.len()
    }

    fn normalize<'a>(&self, token: &'a str) -> std::borrow::Cow<'a, str> {
        match self.case_mode {
            CaseMode::Sensitive => std::borrow::Cow::Borrowed(token),
            CaseMode::Insensitive => std::borrow::Cow::Owned(casefold(token)),
        }
    }

    fn key_of(&self, token: &str) -> Option<u32> {
        self.keys.get(self.normalize(token).as_ref()).copied()
    }

    /// Inserts a multi-token entry; returns whether it was new.
    pub fn insert<S: AsRef<str>>(&mut self, entry: &[S]) -> Result<bool> {
        if entry.is_empty() {
            return Err(Error::EmptyEntry);
        }
        let mut node = ROOT;
        for tok in entry {
            let norm = self.normalize(tok.as_ref());
            let key = match self.keys.get(norm.as_ref()) {
                Some(&k) => k,
                None => {
                    let k = self.keys.len() as u32;
                    self.keys.insert(norm.into_owned().into_boxed_str(), k);
                    k
                }
            };
            let next_id = self.terminal.len() as u32;
            let child = *self.edges.entry(edge_key(node, key)).or_insert(next_id);
            if child == next_id {
                self.terminal.push(false);
            }
            node = child;
        }
        let fresh = !self.terminal[node as usize];
        if fresh {
            self.terminal[node as usize] = true;
            self.n_entries += 1;
        }
        self.max_depth = self.max_depth.max(entry.len());
        Ok(fresh)
    }

    pub fn contains<S: AsRef<str>>(&self, entry: &[S]) -> bool {
        if entry.is_empty() {
            return false;
        }
        let mut node = ROOT;
        for tok in entry {
            let Some(key) = self.key_of(tok.as_ref()) else {
                return false;
            };
            match self.edges.get(&edge_key(node, key)) {
                Some(&c) => node = c,
                None => return false,
            }
        }
        self.terminal[node as usize]
    }

    /// Length of the longest entry that is a prefix of `keys`.
    fn longest_match(&self, keys: &[Option<u32>]) -> usize {
        let mut node = ROOT;
        let mut best = 0;
        for (depth, key) in keys.iter().enumerate() {
            let Some(key) = key else { break };
            match self.edges.get(&edge_key(node, *key)) {
                Some(&c) => node = c,
                None => break,
            }
            if self.terminal[node as usize] {
                best = depth + 1;
            }
        }
        best
    }

    /// Leftmost-longest, non-overlapping matches over a token sequence.
    pub fn search_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<(usize, usize)> {
        if self.is_empty() {
            return Vec::new();
        }
        let keys: Vec<Option<u32>> = tokens.iter().map(|t| self.key_of(t.as_ref())).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < keys.len() {
            let len = self.longest_match(&keys[i..]);
            if len > 0 {
                out.push((i, i + len));
                i += len;
            } else {
                i += 1;
            }
        }
        out
    }

    pub fn search(&self, doc: &Document) -> Vec<Span> {
        let texts: Vec<&str> = doc.tokens.iter().map(|t| t.text.as_str()).collect();
        self.search_tokens(&texts)
            .into_iter()
            .map(|(s, e)| Span::new(s, e, self.label.clone()))
            .collect()
    }

    /// Loads entries from a text file: one entry per line, tokens separated by
    /// spaces. Blank lines are skipped; tabs are rejected.
    pub fn load(path: impl AsRef<Path>, label: impl Into<String>, case_mode: CaseMode) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut trie = GazetteerTrie::new(label, case_mode);
        for (i, line) in content.lines().enumerate() {
            if line.contains('\t') {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: gazetteer entries must not contain tabs",
                    path.display(),
                    i + 1
                )));
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                trie.insert(&tokens)?;
            }
        }
        Ok(trie)
    }
}
