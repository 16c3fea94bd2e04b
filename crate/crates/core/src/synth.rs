//! Synthetic corpora sampled from a known generative model.
//!
//! Latent states follow a BIO-valid Markov chain (one class per document in
//! classification mode). Each labelling function emits one observed symbol
//! per position from an emission matrix built from its profile: how often it
//! fires on labelled positions, how often it picks the right label when it
//! does, and how often it fires on unlabelled positions. The sampled symbol
//! columns are turned into span layers with BIO repair, as for any other
//! function.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{FitOptions, HmmParams};
use crate::corpus::{
    decode_bio, decode_states, write_corpus, BioTag, Document, Gold, LabelSpace, LabelSpaceDecl, Mode, ObservedSymbol,
    Span,
};
use crate::error::{Error, Result};
use crate::lf::{LfConfig, LfDecl, LfKind, PredictionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfProfile {
    pub name: String,
    /// Group used for subset experiments, e.g. "heuristics" or "models".
    pub family: String,
    /// Probability of firing on a labelled position.
    pub recall: f64,
    /// Probability that a firing on a labelled position carries the right label.
    pub accuracy: f64,
    /// Probability of firing on an unlabelled position.
    pub false_positive_rate: f64,
    /// Emit this underspecified label instead of the right concrete one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub underspecified: Option<String>,
}

impl LfProfile {
    pub fn new(name: &str, family: &str, recall: f64, accuracy: f64, false_positive_rate: f64) -> Self {
        LfProfile {
            name: name.to_string(),
            family: family.to_string(),
            recall,
            accuracy,
            false_positive_rate,
            underspecified: None,
        }
    }

    pub fn emitting(mut self, label: &str) -> Self {
        self.underspecified = Some(label.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub labels: LabelSpaceDecl,
    pub n_docs: usize,
    pub doc_len: usize,
    /// Probability of starting a span from the outside state.
    pub mention_rate: f64,
    /// Probability of extending the current span by one token.
    pub continue_rate: f64,
    pub lfs: Vec<LfProfile>,
    pub seed: u64,
}

impl SynthSpec {
    /// Three entity types, an underspecified ENT over all of them, and six
    /// functions in three families of differing quality.
    pub fn standard(n_docs: usize, doc_len: usize, seed: u64) -> Self {
        let lfs = vec![
            LfProfile::new("heur_precise", "heuristics", 0.45, 0.95, 0.02),
            LfProfile::new("heur_loose", "heuristics", 0.60, 0.70, 0.12).emitting("ENT"),
            LfProfile::new("gaz_small", "gazetteers", 0.35, 0.98, 0.01),
            LfProfile::new("gaz_large", "gazetteers", 0.55, 0.80, 0.08),
            LfProfile::new("model_a", "models", 0.80, 0.75, 0.15),
            LfProfile::new("model_b", "models", 0.70, 0.85, 0.06),
        ];
        SynthSpec {
            labels: LabelSpaceDecl {
                mode: Mode::Sequence,
                concrete: vec!["PERSON".into(), "ORG".into(), "LOC".into()],
                underspecified: BTreeMap::from([("ENT".to_string(), vec!["PERSON".into(), "ORG".into(), "LOC".into()])]),
            },
            n_docs,
            doc_len,
            mention_rate: 0.15,
            continue_rate: 0.5,
            lfs,
            seed,
        }
    }

    /// Like [`SynthSpec::standard`] with `n_lfs` functions whose quality
    /// cycles through the standard profiles.
    pub fn with_n_lfs(n_docs: usize, doc_len: usize, n_lfs: usize, seed: u64) -> Self {
        let mut spec = Self::standard(n_docs, doc_len, seed);
        let base = spec.lfs.clone();
        spec.lfs = (0..n_lfs)
            .map(|j| {
                let mut p = base[j % base.len()].clone();
                if j >= base.len() {
                    p.name = format!("{}_{}", p.name, j / base.len());
                    p.recall *= 0.9;
                }
                p
            })
            .collect();
        spec
    }

    pub fn classification(n_docs: usize, doc_len: usize, seed: u64) -> Self {
        let mut spec = Self::standard(n_docs, doc_len, seed);
        spec.labels = LabelSpaceDecl {
            mode: Mode::Classification,
            concrete: vec!["POS".into(), "NEU".into(), "NEG".into()],
            underspecified: BTreeMap::from([("NOT_POS".to_string(), vec!["NEU".into(), "NEG".into()])]),
        };
        spec.lfs[1].underspecified = Some("NOT_POS".into());
        spec
    }

    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(self.labels.clone())
    }

    fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.lfs.is_empty() || self.doc_len == 0 {
            return Err(Error::InvalidConfig("synthetic corpus needs functions and non-empty documents".into()));
        }
        if !unit(self.mention_rate) || !unit(self.continue_rate) {
            return Err(Error::InvalidConfig("synthetic rates must lie in [0, 1]".into()));
        }
        for p in &self.lfs {
            if !unit(p.recall) || !unit(p.accuracy) || !unit(p.false_positive_rate) {
                return Err(Error::InvalidConfig(format!("profile `{}` has a rate outside [0, 1]", p.name)));
            }
        }
        Ok(())
    }
}

/// Generating start and transition distributions. Structurally impossible
/// moves have probability exactly zero.
fn chain(space: &LabelSpace, spec: &SynthSpec) -> (Vec<f64>, Vec<Vec<f64>>) {
    let s_n = space.n_states();
    let c_n = space.n_concrete() as f64;
    if space.mode() == Mode::Classification {
        let start = vec![1.0 / s_n as f64; s_n];
        return (start.clone(), vec![start; s_n]);
    }
    let (m, q) = (spec.mention_rate, spec.continue_rate);
    let mut start = vec![0.0; s_n];
    let mut trans = vec![vec![0.0; s_n]; s_n];
    for k in 0..s_n {
        match BioTag::from_latent(space.state(k)) {
            BioTag::Outside => start[k] = 1.0 - m,
            BioTag::Begin(_) => start[k] = m / c_n,
            BioTag::Inside(_) => {}
        }
    }
    for (l, row) in trans.iter_mut().enumerate() {
        let from = BioTag::from_latent(space.state(l));
        for (k, p) in row.iter_mut().enumerate() {
            let to = BioTag::from_latent(space.state(k));
            *p = match (from, to) {
                (BioTag::Outside, BioTag::Outside) => 1.0 - m,
                (BioTag::Outside, BioTag::Begin(_)) => m / c_n,
                (_, BioTag::Inside(x)) if from.label() == Some(x) => q,
                (_, BioTag::Inside(_)) => 0.0,
                (_, BioTag::Outside) => (1.0 - q) * (1.0 - m),
                (_, BioTag::Begin(_)) => (1.0 - q) * m / c_n,
            };
        }
    }
    (start, trans)
}

/// Emission matrix (states x symbols) of one profile.
fn emission_matrix(space: &LabelSpace, profile: &LfProfile) -> Result<Vec<Vec<f64>>> {
    let under = profile.underspecified.as_deref().map(|u| space.require_label(u)).transpose()?;
    let c_n = space.n_concrete();
    let l_n = space.n_symbols();
    // symbol index of (prefix-of-state, label)
    let same_shape = |state: BioTag, label| {
        let obs = match (space.mode(), state) {
            (Mode::Classification, _) => ObservedSymbol::Class(label),
            (_, BioTag::Inside(_)) => ObservedSymbol::Inside(label),
            _ => ObservedSymbol::Begin(label),
        };
        space.symbol_index(obs).expect("symbol in alphabet")
    };
    let mut rows = Vec::with_capacity(space.n_states());
    for s in 0..space.n_states() {
        let mut row = vec![0.0; l_n];
        let state = BioTag::from_latent(space.state(s));
        match state {
            BioTag::Outside => {
                let fp = profile.false_positive_rate;
                row[0] = 1.0 - fp;
                for c in 0..c_n {
                    let label = crate::corpus::LabelId(c);
                    let b = space.symbol_index(ObservedSymbol::Begin(label)).expect("symbol");
                    let i = space.symbol_index(ObservedSymbol::Inside(label)).expect("symbol");
                    row[b] += 0.7 * fp / c_n as f64;
                    row[i] += 0.3 * fp / c_n as f64;
                }
            }
            BioTag::Begin(c) | BioTag::Inside(c) => {
                let (r, a) = (profile.recall, profile.accuracy);
                row[0] = 1.0 - r;
                let right = match under {
                    Some(u) if space.covers(u, c) => u,
                    _ => c,
                };
                row[same_shape(state, right)] += r * a;
                let others: Vec<_> = (0..c_n).map(crate::corpus::LabelId).filter(|&x| x != c).collect();
                if others.is_empty() {
                    row[same_shape(state, right)] += r * (1.0 - a);
                } else {
                    for &x in &others {
                        row[same_shape(state, x)] += r * (1.0 - a) / others.len() as f64;
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// A sampled corpus: documents carry gold annotations and one layer per
/// function, named after the function.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub space: LabelSpace,
    /// The generating model. Unlike fitted parameters it may contain zeros.
    pub params: HmmParams,
    pub docs: Vec<Document>,
    pub states: Vec<Vec<usize>>,
}

impl SynthCorpus {
    pub fn lf_names(&self) -> Vec<String> {
        self.spec.lfs.iter().map(|p| p.name.clone()).collect()
    }

    pub fn families(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for p in &self.spec.lfs {
            out.entry(p.family.clone()).or_default().push(p.name.clone());
        }
        out
    }

    pub fn gold_layers(&self) -> Vec<Vec<Span>> {
        self.docs.iter().map(|d| d.gold_spans().map(<[Span]>::to_vec).unwrap_or_default()).collect()
    }
}

fn sample(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    WeightedIndex::new(probs).expect("distribution has positive mass").sample(rng)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let space = spec.label_space()?;
    let (start, transitions) = chain(&space, spec);
    let emissions = spec.lfs.iter().map(|p| emission_matrix(&space, p)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let words: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
    let mut docs = Vec::with_capacity(spec.n_docs);
    let mut all_states = Vec::with_capacity(spec.n_docs);
    for d in 0..spec.n_docs {
        let text = (0..spec.doc_len).map(|_| words[rng.gen_range(0..words.len())].as_str()).collect::<Vec<_>>().join(" ");
        let mut doc = Document::from_whitespace(format!("synth-{d:05}"), &text);
        let rows = if space.mode() == Mode::Sequence { spec.doc_len } else { 1 };
        let mut states = Vec::with_capacity(rows);
        for i in 0..rows {
            let dist = if i == 0 { &start } else { &transitions[states[i - 1]] };
            states.push(sample(&mut rng, dist));
        }
        let symbols: Vec<Vec<usize>> = emissions
            .iter()
            .map(|em| states.iter().map(|&s| sample(&mut rng, &em[s])).collect())
            .collect();
        match space.mode() {
            Mode::Sequence => {
                doc.gold = Some(Gold::Spans(decode_states(&states, &space).0));
                for (profile, column) in spec.lfs.iter().zip(&symbols) {
                    let tags: Vec<BioTag> = column.iter().map(|&k| BioTag::from_observed(space.symbol(k))).collect();
                    doc.set_layer(profile.name.clone(), decode_bio(&tags, &space).0);
                }
            }
            Mode::Classification => {
                doc.gold = Some(Gold::Class(space.state_names()[states[0]].clone()));
                for (profile, column) in spec.lfs.iter().zip(&symbols) {
                    let spans = match space.symbol_label(column[0]) {
                        Some(id) => vec![Span::new(0, doc.tokens.len(), space.label_name(id))],
                        None => vec![],
                    };
                    doc.set_layer(profile.name.clone(), spans);
                }
            }
        }
        docs.push(doc);
        all_states.push(states);
    }
    let l_n = space.n_symbols();
    let params = HmmParams {
        start,
        transitions,
        emissions,
        weights: vec![vec![1.0; l_n]; spec.lfs.len()],
        gamma: 0.0,
        alpha: 0.0,
    };
    Ok(SynthCorpus {
        spec: spec.clone(),
        space,
        params,
        docs,
        states: all_states,
    })
}

/// Per-function accuracy implied by emission parameters: the probability of
/// a compatible symbol given that the function fires, averaged over the
/// non-outside states.
pub fn emission_accuracy(params: &HmmParams, space: &LabelSpace, lf: usize) -> f64 {
    let first = if space.mode() == Mode::Sequence { 1 } else { 0 };
    let n = space.n_states() - first;
    (first..space.n_states())
        .map(|s| {
            let row = &params.emissions[lf][s];
            let fired: f64 = row[1..].iter().sum();
            let right: f64 = (1..row.len()).filter(|&k| space.compatible_idx(k, s)).map(|k| row[k]).sum();
            if fired > 0.0 {
                right / fired
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / n as f64
}

#[derive(Serialize)]
struct GeneratingModel<'a> {
    spec: &'a SynthSpec,
    states: Vec<String>,
    symbols: Vec<String>,
    params: &'a HmmParams,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes a synthetic corpus as a self-contained project directory:
/// `corpus.jsonl` (tokens and gold), `predictions/<lf>.jsonl`, `lfs.toml`
/// declaring every function as an external one, and `params.json` with the
/// generating model.
pub fn write_project(dir: &Path, corpus: &SynthCorpus, options: FitOptions) -> Result<()> {
    let pred_dir = dir.join("predictions");
    fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
    let bare: Vec<Document> = corpus
        .docs
        .iter()
        .map(|d| Document {
            layers: BTreeMap::new(),
            ..d.clone()
        })
        .collect();
    write_corpus(dir.join("corpus.jsonl"), &bare)?;
    let mut decls = Vec::new();
    for name in corpus.lf_names() {
        let mut out = String::new();
        for d in &corpus.docs {
            let record = PredictionRecord {
                doc_id: d.doc_id.clone(),
                spans: d.layer(&name).map(<[Span]>::to_vec).unwrap_or_default(),
            };
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        let rel = PathBuf::from("predictions").join(format!("{name}.jsonl"));
        write_file(&dir.join(&rel), &out)?;
        decls.push(LfDecl {
            name,
            depends_on: vec![],
            kind: LfKind::External {
                path: rel,
                label_map: None,
            },
        });
    }
    let config = LfConfig {
        labels: corpus.spec.labels.clone(),
        model: options,
        lf: decls,
    };
    let toml = toml::to_string(&config).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    write_file(&dir.join("lfs.toml"), &toml)?;
    let model = GeneratingModel {
        spec: &corpus.spec,
        states: corpus.space.state_names().to_vec(),
        symbols: corpus.space.symbol_names().to_vec(),
        params: &corpus.params,
    };
    let mut json = serde_json::to_string_pretty(&model).expect("model serializes");
    json.push('\n');
    write_file(&dir.join("params.json"), &json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_distributions() {
        let spec = SynthSpec::standard(1, 5, 0);
        let space = spec.label_space().unwrap();
        let (start, trans) = chain(&space, &spec);
        assert!((start.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for row in &trans {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for p in &spec.lfs {
            for row in emission_matrix(&space, p).unwrap() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let spec = SynthSpec::standard(20, 15, 7);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.docs, b.docs);
        for (doc, states) in a.docs.iter().zip(&a.states) {
            doc.validate().unwrap();
            assert_eq!(states.len(), 15);
            for w in states.windows(2) {
                assert!(crate::corpus::valid_transition(Some(a.space.state(w[0])), a.space.state(w[1])));
            }
        }
        let other = generate(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.docs, other.docs);
    }

    #[test]
    fn generating_accuracy() {
        let spec = SynthSpec::standard(1, 1, 0);
        let c = generate(&spec).unwrap();
        for (j, p) in spec.lfs.iter().enumerate() {
            assert!((emission_accuracy(&c.params, &c.space, j) - p.accuracy).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_corpus() {
        let c = generate(&SynthSpec::classification(30, 4, 1)).unwrap();
        for d in &c.docs {
            assert!(d.gold_class().is_some());
            for layer in d.layers.values() {
                assert!(layer.len() <= 1);
            }
        }
    }
}
