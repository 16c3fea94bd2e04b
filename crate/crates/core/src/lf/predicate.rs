use std::fmt;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Token;
use crate::error::{Error, Result};

/// A regular expression matched at the start of the token text, in the manner
/// of Python's `re.match`. Use `$` to require a full match.
#[derive(Clone)]
pub struct Pattern {
    source: String,
    regex: Regex,
}

impl Pattern {
    pub fn new(source: &str) -> Result<Self> {
        let regex = Regex::new(&format!("^(?:{source})")).map_err(|e| Error::Regex {
            pattern: source.to_string(),
            source: e,
        })?;
        Ok(Pattern {
            source: source.to_string(),
            regex,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({:?})", self.source)
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let source = String::deserialize(d)?;
        Pattern::new(&source).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    IsTitle,
    IsUpper,
    IsLower,
    IsDigit,
    IsAlpha,
    IsPunct,
    IsCurrency,
    LikeNum,
    StartsWithDigit,
}

impl Flag {
    pub fn eval(self, tok: &Token) -> bool {
        match self {
            Flag::IsTitle => tok.is_title(),
            Flag::IsUpper => tok.is_upper(),
            Flag::IsLower => tok.is_lower(),
            Flag::IsDigit => tok.is_digit(),
            Flag::IsAlpha => tok.is_alpha(),
            Flag::IsPunct => tok.is_punct(),
            Flag::IsCurrency => tok.is_currency(),
            Flag::LikeNum => tok.like_num(),
            Flag::StartsWithDigit => tok.text.chars().next().is_some_and(|c| c.is_numeric()),
        }
    }
}

/// Boolean expression over token attributes. Conditions on a missing
/// attribute (no POS tag, no lemma) are false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenPredicate {
    Const(bool),
    Text(String),
    TextIn(Vec<String>),
    Lemma(String),
    LemmaIn(Vec<String>),
    Pos(String),
    PosIn(Vec<String>),
    Flag(Flag),
    TextMatches(Pattern),
    And(Vec<TokenPredicate>),
    Or(Vec<TokenPredicate>),
    Not(Box<TokenPredicate>),
}

impl TokenPredicate {
    pub fn eval(&self, tok: &Token) -> bool {
        use TokenPredicate::*;
        match self {
            Const(b) => *b,
            Text(t) => tok.text == *t,
            TextIn(ts) => ts.iter().any(|t| *t == tok.text),
            Lemma(l) => tok.lemma.as_deref() == Some(l.as_str()),
            LemmaIn(ls) => tok.lemma.as_ref().is_some_and(|l| ls.contains(l)),
            Pos(p) => tok.pos.as_deref() == Some(p.as_str()),
            PosIn(ps) => tok.pos.as_ref().is_some_and(|p| ps.contains(p)),
            Flag(f) => f.eval(tok),
            TextMatches(p) => p.is_match(&tok.text),
            And(ps) => ps.iter().all(|p| p.eval(tok)),
            Or(ps) => ps.iter().any(|p| p.eval(tok)),
            Not(p) => !p.eval(tok),
        }
    }

    pub fn matches(pattern: &str) -> Result<Self> {
        Ok(TokenPredicate::TextMatches(Pattern::new(pattern)?))
    }
}
