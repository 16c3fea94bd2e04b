//! Declarative labelling-function configuration (TOML).
//!
//! ```toml
//! [labels]
//! mode = "sequence"
//! concrete = ["PERSON", "DATE", "MONEY"]
//!
//! [[lf]]
//! name = "years"
//! kind = "token_rule"
//! label = "DATE"
//! predicate = { text_matches = '(19|20)\d{2}$' }
//! ```
//!
//! Relative paths (gazetteer files, prediction files) are resolved against the
//! directory of the configuration file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::doclevel::{doc_first_mention, doc_majority};
use super::external::{ingest_external, Predictions};
use super::pipeline::{Annotator, LabellingFunction, Pipeline};
use super::predicate::TokenPredicate;
use super::rules::{apply_neighbour_rule, apply_regex_rule, apply_token_rule};
use super::trie::{CaseMode, GazetteerTrie};
use crate::aggregation::FitOptions;
use crate::corpus::{Document, LabelSpace, LabelSpaceDecl, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LfKind {
    TokenRule {
        predicate: TokenPredicate,
        label: String,
        #[serde(default)]
        merge: bool,
    },
    NeighbourRule {
        predicate: TokenPredicate,
        offset: i64,
        neighbour: TokenPredicate,
        span: (i64, i64),
        label: String,
    },
    RegexRule {
        pattern: String,
        label: String,
        #[serde(default)]
        case_insensitive: bool,
    },
    Gazetteer {
        label: String,
        /// Inline entries, tokens separated by spaces.
        #[serde(default)]
        entries: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default)]
        case: CaseMode,
    },
    External {
        path: PathBuf,
        /// External label -> label of this label space. Identity over the
        /// label space when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_map: Option<BTreeMap<String, String>>,
    },
    DocMajority {
        source: String,
    },
    DocFirstMention {
        source: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfDecl {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depends_on: Vec<String>,
    #[serde(flatten)]
    pub kind: LfKind,
}

/// Contents of a configuration file: label space, aggregation settings and
/// the labelling functions, in column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfConfig {
    pub labels: LabelSpaceDecl,
    #[serde(default)]
    pub model: FitOptions,
    #[serde(default)]
    pub lf: Vec<LfDecl>,
}

impl LfConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: LfConfig = toml::from_str(&text).map_err(|e| Error::Toml {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Toml {
            path: PathBuf::from("<inline>"),
            source: e,
        })
    }

    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(self.labels.clone())
    }

    pub fn names(&self) -> Vec<String> {
        self.lf.iter().map(|d| d.name.clone()).collect()
    }

    /// Compiles the declarations into a validated pipeline.
    pub fn build(&self, base_dir: &Path, space: &LabelSpace) -> Result<Pipeline> {
        let emits = resolve_emits(&self.lf, space)?;
        let mut lfs = Vec::with_capacity(self.lf.len());
        for decl in &self.lf {
            let annotator = compile(&decl.kind, base_dir, space)?;
            let mut deps = decl.depends_on.clone();
            if let LfKind::DocMajority { source } | LfKind::DocFirstMention { source } = &decl.kind {
                deps.push(source.clone());
            }
            let lf = LabellingFunction::new(decl.name.clone(), emits[&decl.name].iter().cloned(), ArcAnnotator(annotator))
                .with_dependencies(deps);
            lfs.push(lf);
        }
        let pipeline = Pipeline::new(lfs)?;
        pipeline.check_labels(space)?;
        Ok(pipeline)
    }
}

struct ArcAnnotator(Arc<dyn Annotator>);

impl Annotator for ArcAnnotator {
    fn annotate(&self, doc: &Document) -> Result<Vec<Span>> {
        self.0.annotate(doc)
    }
}

fn resolve_emits(decls: &[LfDecl], space: &LabelSpace) -> Result<HashMap<String, BTreeSet<String>>> {
    let mut emits: HashMap<String, BTreeSet<String>> = HashMap::new();
    let all_labels = || -> BTreeSet<String> {
        (0..space.n_labels())
            .map(|i| space.label_name(crate::corpus::LabelId(i)).to_string())
            .collect()
    };
    for d in decls {
        let set = match &d.kind {
            LfKind::TokenRule { label, .. }
            | LfKind::NeighbourRule { label, .. }
            | LfKind::RegexRule { label, .. }
            | LfKind::Gazetteer { label, .. } => BTreeSet::from([label.clone()]),
            LfKind::External { label_map: Some(m), .. } => m.values().cloned().collect(),
            LfKind::External { label_map: None, .. } => all_labels(),
            LfKind::DocMajority { .. } | LfKind::DocFirstMention { .. } => continue,
        };
        emits.insert(d.name.clone(), set);
    }
    // document-level functions inherit the labels of their source
    let names: BTreeSet<&str> = decls.iter().map(|d| d.name.as_str()).collect();
    for _ in 0..decls.len() {
        for d in decls {
            if let LfKind::DocMajority { source } | LfKind::DocFirstMention { source } = &d.kind {
                if !names.contains(source.as_str()) {
                    return Err(Error::MissingLayer {
                        layer: source.clone(),
                        context: Some(format!("source of labelling function `{}`", d.name)),
                    });
                }
                if let Some(src) = emits.get(source).cloned() {
                    emits.insert(d.name.clone(), src);
                }
            }
        }
    }
    for d in decls {
        // unresolved only when document-level functions feed each other in a cycle
        emits.entry(d.name.clone()).or_default();
    }
    Ok(emits)
}

fn compile(kind: &LfKind, base_dir: &Path, space: &LabelSpace) -> Result<Arc<dyn Annotator>> {
    Ok(match kind.clone() {
        LfKind::TokenRule { predicate, label, merge } => {
            Arc::new(move |doc: &Document| Ok(apply_token_rule(doc, &predicate, &label, merge)))
        }
        LfKind::NeighbourRule {
            predicate,
            offset,
            neighbour,
            span,
            label,
        } => {
            if span.0 >= span.1 {
                return Err(Error::InvalidConfig(format!(
                    "neighbour rule span ({}, {}) is empty",
                    span.0, span.1
                )));
            }
            Arc::new(move |doc: &Document| Ok(apply_neighbour_rule(doc, &predicate, offset, &neighbour, span, &label)))
        }
        LfKind::RegexRule {
            pattern,
            label,
            case_insensitive,
        } => {
            let regex: Regex = RegexBuilder::new(&pattern)
                .case_insensitive(case_insensitive)
                .build()
                .map_err(|e| Error::Regex {
                    pattern: pattern.clone(),
                    source: e,
                })?;
            Arc::new(move |doc: &Document| Ok(apply_regex_rule(doc, &regex, &label)))
        }
        LfKind::Gazetteer {
            label,
            entries,
            path,
            case,
        } => {
            let mut trie = match path {
                Some(p) => GazetteerTrie::load(base_dir.join(p), label, case)?,
                None => GazetteerTrie::new(label, case),
            };
            for e in &entries {
                let tokens: Vec<&str> = e.split_whitespace().collect();
                trie.insert(&tokens)?;
            }
            let trie = Arc::new(trie);
            Arc::new(move |doc: &Document| Ok(trie.search(doc)))
        }
        LfKind::External { path, label_map } => {
            let predictions = Predictions::load(base_dir.join(path))?;
            let map = match label_map {
                Some(m) => m,
                None => (0..space.n_labels())
                    .map(|i| {
                        let l = space.label_name(crate::corpus::LabelId(i)).to_string();
                        (l.clone(), l)
                    })
                    .collect(),
            };
            Arc::new(move |doc: &Document| ingest_external(doc, predictions.get(&doc.doc_id), &map))
        }
        LfKind::DocMajority { source } => Arc::new(move |doc: &Document| doc_majority(doc, &source)),
        LfKind::DocFirstMention { source } => Arc::new(move |doc: &Document| doc_first_mention(doc, &source)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[labels]
mode = "sequence"
concrete = ["PERSON", "ORG", "DATE", "MONEY"]
underspecified = { ENT = ["PERSON", "ORG"] }

[model]
gamma = 0.5

[[lf]]
name = "money"
kind = "neighbour_rule"
predicate = { flag = "is_digit" }
offset = -1
neighbour = { flag = "is_currency" }
span = [-1, 1]
label = "MONEY"

[[lf]]
name = "years"
kind = "token_rule"
predicate = { text_matches = '(19|20)\d{2}$' }
label = "DATE"

[[lf]]
name = "presidents"
kind = "gazetteer"
label = "PERSON"
entries = ["Barack Obama", "Donald Trump", "Joe Biden"]

[[lf]]
name = "proper"
kind = "token_rule"
predicate = { flag = "is_title" }
label = "ENT"
merge = true

[[lf]]
name = "proper_majority"
kind = "doc_majority"
source = "proper"
"#;

    #[test]
    fn parses_and_runs() {
        let config = LfConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(config.model.gamma, 0.5);
        assert_eq!(config.model.alpha, FitOptions::default().alpha);
        let space = config.label_space().unwrap();
        let pipeline = config.build(Path::new("."), &space).unwrap();
        assert_eq!(pipeline.names(), ["money", "years", "presidents", "proper", "proper_majority"]);
        assert_eq!(pipeline.functions()[4].emits(), &BTreeSet::from(["ENT".to_string()]));
        assert_eq!(pipeline.neighborhoods()[3], vec![4]);

        let mut docs = vec![Document::from_whitespace(
            "ex",
            "Donald Trump paid $ 750 in federal income taxes in 2016",
        )];
        pipeline.apply(&mut docs).unwrap();
        let d = &docs[0];
        assert_eq!(d.layer("money").unwrap(), &[Span::new(3, 5, "MONEY")]);
        assert_eq!(d.layer("years").unwrap(), &[Span::new(10, 11, "DATE")]);
        assert_eq!(d.layer("presidents").unwrap(), &[Span::new(0, 2, "PERSON")]);
        assert_eq!(d.layer("proper").unwrap(), &[Span::new(0, 2, "ENT")]);
        assert!(d.layer("proper_majority").unwrap().is_empty());

        let back = LfConfig::from_toml(&toml::to_string(&config).unwrap()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn config_errors() {
        let bad_label = EXAMPLE.replace("label = \"DATE\"", "label = \"YEAR\"");
        let config = LfConfig::from_toml(&bad_label).unwrap();
        let space = config.label_space().unwrap();
        assert!(matches!(config.build(Path::new("."), &space), Err(Error::UnknownLabel(_))));

        let missing = EXAMPLE.replace("source = \"proper\"", "source = \"nothing\"");
        let config = LfConfig::from_toml(&missing).unwrap();
        assert!(matches!(config.build(Path::new("."), &space), Err(Error::MissingLayer { .. })));

        let cyclic = format!(
            "{EXAMPLE}\n[[lf]]\nname = \"a\"\nkind = \"doc_majority\"\nsource = \"b\"\n\n[[lf]]\nname = \"b\"\nkind = \"doc_first_mention\"\nsource = \"a\"\n"
        );
        let config = LfConfig::from_toml(&cyclic).unwrap();
        assert!(matches!(config.build(Path::new("."), &space), Err(Error::CycleDetected(_))));

        assert!(LfConfig::from_toml("[labels]\nconcrete = [\"A\"]\n[[lf]]\nname = \"x\"\nkind = \"bogus\"\n").is_err());
    }
}
