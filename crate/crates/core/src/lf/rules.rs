use regex::Regex;

use super::predicate::TokenPredicate;
use crate::corpus::{Document, Span};

/// One span per token satisfying `predicate`, or one span per maximal run of
/// such tokens when `merge` is set.
pub fn apply_token_rule(doc: &Document, predicate: &TokenPredicate, label: &str, merge: bool) -> Vec<Span> {
    let mut spans: Vec<Span> = Vec::new();
    for (i, tok) in doc.tokens.iter().enumerate() {
        if !predicate.eval(tok) {
            continue;
        }
        match spans.last_mut() {
            Some(last) if merge && last.end == i => last.end = i + 1,
            _ => spans.push(Span::new(i, i + 1, label)),
        }
    }
    spans
}

/// For every token `i` where `self_pred` holds on token `i` and `neighbour_pred`
/// holds on token `i + offset`, emits `(i + rel.0, i + rel.1, label)`. Hits
/// whose neighbour or span falls outside the document are skipped.
pub fn apply_neighbour_rule(
    doc: &Document,
    self_pred: &TokenPredicate,
    offset: i64,
    neighbour_pred: &TokenPredicate,
    rel: (i64, i64),
    label: &str,
) -> Vec<Span> {
    let n = doc.tokens.len() as i64;
    let mut spans = Vec::new();
    for (i, tok) in doc.tokens.iter().enumerate() {
        let i = i as i64;
        let j = i + offset;
        let (start, end) = (i + rel.0, i + rel.1);
        if j < 0 || j >= n || start < 0 || end > n || start >= end {
            continue;
        }
        if self_pred.eval(tok) && neighbour_pred.eval(&doc.tokens[j as usize]) {
            spans.push(Span::new(start as usize, end as usize, label));
        }
    }
    spans
}

/// Regex over the document text. A match becomes a span only when it starts at
/// a token start and ends at a token end.
pub fn apply_regex_rule(doc: &Document, regex: &Regex, label: &str) -> Vec<Span> {
    // byte offset -> char offset
    let mut char_of_byte = vec![0usize; doc.text.len() + 1];
    let mut n_chars = 0;
    for (ci, (bi, _)) in doc.text.char_indices().enumerate() {
        char_of_byte[bi] = ci;
        n_chars = ci + 1;
    }
    char_of_byte[doc.text.len()] = n_chars;

    let mut spans = Vec::new();
    for m in regex.find_iter(&doc.text) {
        if m.start() == m.end() {
            continue;
        }
        let (cs, ce) = (char_of_byte[m.start()], char_of_byte[m.end()]);
        let start = doc.tokens.binary_search_by_key(&cs, |t| t.start);
        let end = doc.tokens.binary_search_by_key(&ce, |t| t.end);
        if let (Ok(s), Ok(e)) = (start, end) {
            if s <= e {
                spans.push(Span::new(s, e + 1, label));
            }
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use crate::lf::predicate::Flag;

    pub(crate) fn example_doc() -> Document {
        Document::from_whitespace("ex", "Donald Trump paid $ 750 in federal income taxes in 2016")
    }

    #[test]
    fn years() {
        let pred = TokenPredicate::matches(r"(19|20)\d{2}$").unwrap();
        assert_eq!(apply_token_rule(&example_doc(), &pred, "DATE", false), vec![Span::new(10, 11, "DATE")]);
        assert!(apply_token_rule(&example_doc(), &TokenPredicate::Const(false), "DATE", false).is_empty());
    }

    #[test]
    fn merge_runs() {
        let doc = Document::new(
            "d",
            "A B c",
            vec![
                Token::new("A", 0, 1).with_pos("NNP"),
                Token::new("B", 2, 3).with_pos("NNP"),
                Token::new("c", 4, 5).with_pos("VB"),
            ],
        );
        let nnp = TokenPredicate::Pos("NNP".into());
        assert_eq!(apply_token_rule(&doc, &nnp, "ENT", true), vec![Span::new(0, 2, "ENT")]);
        assert_eq!(
            apply_token_rule(&doc, &nnp, "ENT", false),
            vec![Span::new(0, 1, "ENT"), Span::new(1, 2, "ENT")]
        );
    }

    #[test]
    fn money_detector() {
        let digit = TokenPredicate::Flag(Flag::IsDigit);
        let currency = TokenPredicate::Flag(Flag::IsCurrency);
        let spans = apply_neighbour_rule(&example_doc(), &digit, -1, &currency, (-1, 1), "MONEY");
        assert_eq!(spans, vec![Span::new(3, 5, "MONEY")]);

        // first token cannot look left
        let doc = Document::from_whitespace("d", "750 dollars");
        assert!(apply_neighbour_rule(&doc, &digit, -1, &TokenPredicate::Const(true), (-1, 1), "MONEY").is_empty());

        let doc = Document::from_whitespace("d", "$ 5 and € 7");
        assert_eq!(
            apply_neighbour_rule(&doc, &digit, -1, &currency, (-1, 1), "MONEY"),
            vec![Span::new(0, 2, "MONEY"), Span::new(3, 5, "MONEY")]
        );
    }

    #[test]
    fn regex_alignment() {
        let doc = Document::from_whitespace("d", "paid $ 750 in 2016 and 20161");
        let re = Regex::new(r"\$ \d+").unwrap();
        assert_eq!(apply_regex_rule(&doc, &re, "MONEY"), vec![Span::new(1, 3, "MONEY")]);
        let re = Regex::new(r"201\d").unwrap();
        // "2016" aligns; the prefix of "20161" does not
        assert_eq!(apply_regex_rule(&doc, &re, "DATE"), vec![Span::new(4, 5, "DATE")]);
        let doc = Document::from_whitespace("d", "Zoë paid €5");
        let re = Regex::new(r"€5").unwrap();
        assert_eq!(apply_regex_rule(&doc, &re, "MONEY"), vec![Span::new(2, 3, "MONEY")]);
    }
}
