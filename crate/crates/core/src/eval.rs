//! Scoring against gold annotations and per-function diagnostics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::aggregation::ObservationMatrix;
use crate::corpus::{encode_bio, Document, LabelSpace, Mode, Span};
use crate::error::{Error, Result};

/// How a prediction with an underspecified label is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnderspecifiedPolicy {
    /// Correct whenever the gold label is one of its members.
    #[default]
    Lenient,
    /// Only an identical label is correct.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl From<Counts> for Prf {
    fn from(c: Counts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            counts: c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub n_docs: usize,
    /// Micro scores over tokens, ignoring the B/I distinction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<Prf>,
    /// Micro scores over exact span matches.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity: Option<Prf>,
    /// Document accuracy in classification mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Entity-level scores per label (per class in classification mode).
    pub per_label: BTreeMap<String, Prf>,
    /// Mean F1 over the concrete labels present in gold or predictions.
    pub macro_f1: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Tab-separated table with one row per label and a final micro row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("label\tprecision\trecall\tf1\ttp\tfp\tfn\n");
        let mut row = |name: &str, p: &Prf| {
            let c = p.counts;
            let _ = writeln!(out, "{name}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}", p.precision, p.recall, p.f1, c.tp, c.fp, c.fn_);
        };
        for (label, prf) in &self.per_label {
            row(label, prf);
        }
        if let Some(e) = &self.entity {
            row("*entity", e);
        }
        if let Some(t) = &self.token {
            row("*token", t);
        }
        out
    }
}

fn label_matches(space: &LabelSpace, pred: &str, gold: &str, policy: UnderspecifiedPolicy) -> bool {
    if pred == gold {
        return true;
    }
    policy == UnderspecifiedPolicy::Lenient
        && space
            .label_id(pred)
            .zip(space.label_id(gold))
            .is_some_and(|(p, g)| space.covers(p, g))
}

fn macro_f1(space: &LabelSpace, per_label: &BTreeMap<String, Prf>) -> f64 {
    let scores: Vec<f64> = per_label
        .iter()
        .filter(|(name, _)| space.label_id(name).is_some_and(|id| space.is_concrete(id)))
        .map(|(_, p)| p.f1)
        .collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

fn token_labels<'a>(spans: &'a [Span], n: usize) -> Vec<Option<&'a str>> {
    let mut out = vec![None; n];
    for s in spans {
        for slot in out.iter_mut().take(s.end.min(n)).skip(s.start) {
            *slot = Some(s.label.as_str());
        }
    }
    out
}

/// Scores predicted span layers against gold span layers, document by
/// document. Token counts cover positions `0..max span end` of each pair, so
/// only labelled positions matter.
pub fn score_sequence(pred: &[Vec<Span>], gold: &[Vec<Span>], space: &LabelSpace, policy: UnderspecifiedPolicy) -> Result<EvalReport> {
    if space.mode() != Mode::Sequence {
        return Err(Error::ModeMismatch { expected: "sequence" });
    }
    if gold.is_empty() {
        return Err(Error::NoGold);
    }
    if pred.len() != gold.len() {
        return Err(Error::InvalidConfig(format!("{} predicted documents for {} gold documents", pred.len(), gold.len())));
    }
    let mut token = Counts::default();
    let mut entity = Counts::default();
    let mut per_label: BTreeMap<String, Counts> = BTreeMap::new();
    for (p_spans, g_spans) in pred.iter().zip(gold) {
        let n = p_spans.iter().chain(g_spans).map(|s| s.end).max().unwrap_or(0);
        for (p, g) in token_labels(p_spans, n).into_iter().zip(token_labels(g_spans, n)) {
            match (p, g) {
                (Some(p), Some(g)) if label_matches(space, p, g, policy) => token.tp += 1,
                (Some(_), Some(_)) => {
                    token.fp += 1;
                    token.fn_ += 1;
                }
                (Some(_), None) => token.fp += 1,
                (None, Some(_)) => token.fn_ += 1,
                (None, None) => {}
            }
        }
        let mut matched = vec![false; g_spans.len()];
        for p in p_spans {
            let hit = g_spans.iter().enumerate().position(|(i, g)| {
                !matched[i] && g.start == p.start && g.end == p.end && label_matches(space, &p.label, &g.label, policy)
            });
            match hit {
                Some(i) => {
                    matched[i] = true;
                    entity.tp += 1;
                    per_label.entry(g_spans[i].label.clone()).or_default().tp += 1;
                }
                None => {
                    entity.fp += 1;
                    per_label.entry(p.label.clone()).or_default().fp += 1;
                }
            }
        }
        for (g, m) in g_spans.iter().zip(matched) {
            if !m {
                entity.fn_ += 1;
                per_label.entry(g.label.clone()).or_default().fn_ += 1;
            }
        }
    }
    let per_label: BTreeMap<String, Prf> = per_label.into_iter().map(|(k, c)| (k, c.into())).collect();
    Ok(EvalReport {
        mode: Mode::Sequence,
        n_docs: gold.len(),
        token: Some(token.into()),
        entity: Some(entity.into()),
        accuracy: None,
        macro_f1: macro_f1(space, &per_label),
        per_label,
    })
}

/// Scores predicted classes (None for abstention) against gold classes.
pub fn score_classification(
    pred: &[Option<String>],
    gold: &[String],
    space: &LabelSpace,
    policy: UnderspecifiedPolicy,
) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::NoGold);
    }
    if pred.len() != gold.len() {
        return Err(Error::InvalidConfig(format!("{} predictions for {} gold documents", pred.len(), gold.len())));
    }
    let mut per_label: BTreeMap<String, Counts> = BTreeMap::new();
    let mut correct = 0u64;
    for (p, g) in pred.iter().zip(gold) {
        per_label.entry(g.clone()).or_default();
        match p {
            Some(p) if label_matches(space, p, g, policy) => {
                correct += 1;
                per_label.get_mut(g).expect("inserted").tp += 1;
            }
            Some(p) => {
                per_label.entry(p.clone()).or_default().fp += 1;
                per_label.get_mut(g).expect("inserted").fn_ += 1;
            }
            None => per_label.get_mut(g).expect("inserted").fn_ += 1,
        }
    }
    let per_label: BTreeMap<String, Prf> = per_label.into_iter().map(|(k, c)| (k, c.into())).collect();
    Ok(EvalReport {
        mode: Mode::Classification,
        n_docs: gold.len(),
        token: None,
        entity: None,
        accuracy: Some(correct as f64 / gold.len() as f64),
        macro_f1: macro_f1(space, &per_label),
        per_label,
    })
}

/// Gold latent state per row of the observation matrix: BIO states in
/// sequence mode, the class state in classification mode.
pub fn gold_states(doc: &Document, space: &LabelSpace) -> Result<Vec<usize>> {
    match space.mode() {
        Mode::Sequence => {
            let spans = doc.gold_spans().ok_or(Error::NoGold)?;
            let tags = encode_bio(spans, doc.tokens.len(), space)?;
            tags.into_iter()
                .map(|t| {
                    t.latent(space).and_then(|l| space.state_index(l)).ok_or_else(|| Error::InvalidDocument {
                        doc_id: doc.doc_id.clone(),
                        reason: "gold spans must use concrete labels".into(),
                    })
                })
                .collect()
        }
        Mode::Classification => {
            let class = doc.gold_class().ok_or(Error::NoGold)?;
            let id = space.require_label(class)?;
            if !space.is_concrete(id) {
                return Err(Error::InvalidDocument {
                    doc_id: doc.doc_id.clone(),
                    reason: format!("gold class `{class}` is underspecified"),
                });
            }
            Ok(vec![id.0])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfStats {
    pub name: String,
    /// Share of positions where the function emits a non-VOID symbol.
    pub coverage: f64,
    pub abstention: f64,
    /// Share of emissions whose label covers the gold label (B/I ignored).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    /// Share of gold labelled positions where the function emits a covering label.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfDiagnostics {
    pub functions: Vec<LfStats>,
    /// `agreement[j][l]`: share of positions where `j` or `l` fires at which
    /// both emit the same symbol; None if neither ever fires.
    pub agreement: Vec<Vec<Option<f64>>>,
}

pub fn lf_diagnostics(
    obs: &[ObservationMatrix],
    lf_names: &[String],
    space: &LabelSpace,
    gold: Option<&[Vec<usize>]>,
) -> Result<LfDiagnostics> {
    let n_lfs = lf_names.len();
    if let Some(g) = gold {
        if g.len() != obs.len() || g.iter().zip(obs).any(|(g, o)| g.len() != o.n_rows()) {
            return Err(Error::InvalidConfig("gold states do not align with observations".into()));
        }
    }
    // the "outside" state never counts as a labelled gold position
    let labelled = |s: usize| space.mode() == Mode::Classification || s != 0;
    let mut fired = vec![0u64; n_lfs];
    let mut correct = vec![0u64; n_lfs];
    let mut found = vec![0u64; n_lfs];
    let mut either = vec![0u64; n_lfs * n_lfs];
    let mut same = vec![0u64; n_lfs * n_lfs];
    let mut positions = 0u64;
    let mut gold_positives = 0u64;
    for (d, o) in obs.iter().enumerate() {
        if o.n_lfs() != n_lfs {
            return Err(Error::InvalidConfig("observation width differs from the roster".into()));
        }
        for i in 0..o.n_rows() {
            positions += 1;
            let row = o.row(i);
            let g = gold.map(|g| g[d][i]);
            if let Some(g) = g {
                gold_positives += u64::from(labelled(g));
            }
            for (j, &kj) in row.iter().enumerate() {
                let kj = kj as usize;
                if kj != 0 {
                    fired[j] += 1;
                    if let Some(g) = g {
                        let hit = space.symbol_label(kj).zip(space.state_label(g)).is_some_and(|(x, c)| space.covers(x, c));
                        if labelled(g) && hit {
                            correct[j] += 1;
                            found[j] += 1;
                        }
                    }
                }
                for (l, &kl) in row.iter().enumerate() {
                    if kj != 0 || kl != 0 {
                        either[j * n_lfs + l] += 1;
                        same[j * n_lfs + l] += u64::from(kj == kl as usize);
                    }
                }
            }
        }
    }
    let functions = (0..n_lfs)
        .map(|j| {
            let coverage = ratio(fired[j], positions);
            LfStats {
                name: lf_names[j].clone(),
                coverage,
                abstention: if positions == 0 { 0.0 } else { 1.0 - coverage },
                precision: gold.map(|_| ratio(correct[j], fired[j])),
                recall: gold.map(|_| ratio(found[j], gold_positives)),
            }
        })
        .collect();
    let agreement = (0..n_lfs)
        .map(|j| {
            (0..n_lfs)
                .map(|l| {
                    let e = either[j * n_lfs + l];
                    (e > 0).then(|| same[j * n_lfs + l] as f64 / e as f64)
                })
                .collect()
        })
        .collect();
    Ok(LfDiagnostics { functions, agreement })
}

/// Labels seen in a set of layers, for reporting.
pub fn layer_labels(layers: &[Vec<Span>]) -> BTreeSet<String> {
    layers.iter().flatten().map(|s| s.label.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> LabelSpace {
        LabelSpace::sequence(&["PERSON", "ORG", "DATE"], &[("ENT", &["PERSON", "ORG"])]).unwrap()
    }

    fn sp(s: usize, e: usize, l: &str) -> Span {
        Span::new(s, e, l)
    }

    #[test]
    fn perfect_and_empty() {
        let gold = vec![vec![sp(0, 2, "PERSON"), sp(4, 5, "DATE")]];
        let r = score_sequence(&gold, &gold, &space(), UnderspecifiedPolicy::Lenient).unwrap();
        assert_eq!(r.entity.unwrap().f1, 1.0);
        assert_eq!(r.token.unwrap().f1, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        let r = score_sequence(&[vec![]], &gold, &space(), UnderspecifiedPolicy::Lenient).unwrap();
        assert_eq!(r.entity.unwrap().recall, 0.0);
        assert_eq!(r.entity.unwrap().f1, 0.0);
        assert_eq!(r.token.unwrap().f1, 0.0);
        assert!(matches!(
            score_sequence(&[], &[], &space(), UnderspecifiedPolicy::Lenient),
            Err(Error::NoGold)
        ));
    }

    #[test]
    fn half_match() {
        let gold = vec![vec![sp(0, 2, "PERSON"), sp(4, 5, "DATE")]];
        let pred = vec![vec![sp(0, 2, "PERSON"), sp(3, 5, "DATE")]];
        let e = score_sequence(&pred, &gold, &space(), UnderspecifiedPolicy::Lenient).unwrap().entity.unwrap();
        assert_eq!((e.counts.tp, e.counts.fp, e.counts.fn_), (1, 1, 1));
        assert_eq!((e.precision, e.recall, e.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn token_scores_ignore_prefix() {
        // gold one 3-token span; prediction splits it in two
        let gold = vec![vec![sp(0, 3, "ORG")]];
        let pred = vec![vec![sp(0, 1, "ORG"), sp(1, 3, "ORG")]];
        let r = score_sequence(&pred, &gold, &space(), UnderspecifiedPolicy::Lenient).unwrap();
        assert_eq!(r.token.unwrap().f1, 1.0);
        assert_eq!(r.entity.unwrap().counts.tp, 0);
    }

    #[test]
    fn underspecified_policy() {
        let gold = vec![vec![sp(0, 2, "PERSON")]];
        let pred = vec![vec![sp(0, 2, "ENT")]];
        let lenient = score_sequence(&pred, &gold, &space(), UnderspecifiedPolicy::Lenient).unwrap();
        assert_eq!(lenient.entity.unwrap().f1, 1.0);
        let strict = score_sequence(&pred, &gold, &space(), UnderspecifiedPolicy::Strict).unwrap();
        assert_eq!(strict.entity.unwrap().f1, 0.0);
        assert_eq!(strict.per_label["ENT"].counts.fp, 1);
        // ENT does not cover DATE under either policy
        let gold = vec![vec![sp(0, 2, "DATE")]];
        let r = score_sequence(&pred, &gold, &space(), UnderspecifiedPolicy::Lenient).unwrap();
        assert_eq!(r.entity.unwrap().f1, 0.0);
    }

    fn classes() -> LabelSpace {
        LabelSpace::classification(&["POS", "NEU", "NEG"], &[("NOT_POS", &["NEU", "NEG"])]).unwrap()
    }

    #[test]
    fn classification_scores() {
        let gold: Vec<String> = ["POS", "NEU", "NEG"].iter().map(|s| s.to_string()).collect();
        let perfect: Vec<Option<String>> = gold.iter().cloned().map(Some).collect();
        let r = score_classification(&perfect, &gold, &classes(), UnderspecifiedPolicy::Lenient).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.accuracy, Some(1.0));

        // constant POS on balanced gold: POS has P = 1/3, R = 1, F = 0.5
        let gold: Vec<String> = ["POS", "POS", "NEU", "NEU", "NEG", "NEG"].iter().map(|s| s.to_string()).collect();
        let constant = vec![Some("POS".to_string()); 6];
        let r = score_classification(&constant, &gold, &classes(), UnderspecifiedPolicy::Lenient).unwrap();
        assert!((r.per_label["POS"].f1 - 0.5).abs() < 1e-15);
        assert!((r.macro_f1 - 0.5 / 3.0).abs() < 1e-15);

        assert!(matches!(
            score_classification(&[], &[], &classes(), UnderspecifiedPolicy::Lenient),
            Err(Error::NoGold)
        ));
    }

    #[test]
    fn diagnostics() {
        let sp = LabelSpace::sequence(&["X"], &[]).unwrap();
        // lf0 fires at 0,1; lf1 at 1,2 with the same symbol at 1 only... plus identical lf2 = lf0
        let obs = ObservationMatrix::from_rows(&[vec![1, 0, 1], vec![1, 1, 1], vec![0, 1, 0], vec![0, 0, 0]]);
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let gold = vec![vec![1, 0, 1, 0]];
        let d = lf_diagnostics(&[obs], &names, &sp, Some(&gold)).unwrap();
        assert_eq!(d.functions[0].coverage, 0.5);
        assert_eq!(d.functions[0].abstention, 0.5);
        // fires at 0,1; gold B-X at 0 only -> precision 0.5, recall 1/2
        assert_eq!(d.functions[0].precision, Some(0.5));
        assert_eq!(d.functions[0].recall, Some(0.5));
        assert_eq!(d.agreement[0][2], Some(1.0));
        // tokens where a or b fires: 0, 1, 2; same at 1 only
        assert!((d.agreement[0][1].unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let silent = ObservationMatrix::from_rows(&[vec![0, 1], vec![0, 1]]);
        let d = lf_diagnostics(&[silent], &names[..2], &sp, None).unwrap();
        assert_eq!(d.functions[0].coverage, 0.0);
        assert_eq!(d.agreement[0][0], None);
        assert_eq!(d.functions[0].precision, None);
    }

    #[test]
    fn half_agreement() {
        let sp = LabelSpace::sequence(&["X"], &[]).unwrap();
        let obs = ObservationMatrix::from_rows(&[vec![1, 1], vec![1, 0], vec![0, 0]]);
        let names: Vec<String> = vec!["a".into(), "b".into()];
        let d = lf_diagnostics(&[obs], &names, &sp, None).unwrap();
        assert_eq!(d.agreement[0][1], Some(0.5));
    }

    #[test]
    fn tsv_rows() {
        let gold = vec![vec![sp(0, 2, "PERSON")]];
        let r = score_sequence(&gold, &gold, &space(), UnderspecifiedPolicy::Lenient).unwrap();
        let tsv = r.to_tsv();
        assert_eq!(tsv.lines().count(), 4);
        assert!(tsv.lines().nth(1).unwrap().starts_with("PERSON\t1.000000"));
    }
}
