use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::{Document, LabelSpace, Span};
use crate::error::{Error, Result};

/// Anything that can annotate a document with labelled spans. Returning no
/// span means abstaining everywhere.
pub trait Annotator: Send + Sync {
    fn annotate(&self, doc: &Document) -> Result<Vec<Span>>;
}

impl<F> Annotator for F
where
    F: Fn(&Document) -> Result<Vec<Span>> + Send + Sync,
{
    fn annotate(&self, doc: &Document) -> Result<Vec<Span>> {
        self(doc)
    }
}

#[derive(Clone)]
pub struct LabellingFunction {
    name: String,
    depends_on: Vec<String>,
    emits: BTreeSet<String>,
    annotator: Arc<dyn Annotator>,
}

impl fmt::Debug for LabellingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LabellingFunction")
            .field("name", &self.name)
            .field("depends_on", &self.depends_on)
            .field("emits", &self.emits)
            .finish_non_exhaustive()
    }
}

impl LabellingFunction {
    pub fn new<I, S>(name: impl Into<String>, emits: I, annotator: impl Annotator + 'static) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        LabellingFunction {
            name: name.into(),
            depends_on: Vec::new(),
            emits: emits.into_iter().map(Into::into).collect(),
            annotator: Arc::new(annotator),
        }
    }

    pub fn with_dependencies<I, S>(mut self, deps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for d in deps {
            let d = d.into();
            if !self.depends_on.contains(&d) {
                self.depends_on.push(d);
            }
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn depends_on(&self) -> &[String] {
        &self.depends_on
    }

    pub fn emits(&self) -> &BTreeSet<String> {
        &self.emits
    }

    /// Runs the annotator and checks its output against the declared labels.
    pub fn apply(&self, doc: &Document) -> Result<Vec<Span>> {
        let mut spans = self.annotator.annotate(doc)?;
        for s in &spans {
            if !self.emits.contains(&s.label) {
                return Err(Error::InvalidConfig(format!(
                    "labelling function `{}` produced undeclared label `{}`",
                    self.name, s.label
                )));
            }
        }
        let n = doc.tokens.len();
        if let Some(s) = spans.iter().find(|s| s.start >= s.end || s.end > n) {
            return Err(Error::SpanOutOfRange {
                start: s.start,
                end: s.end,
                n_tokens: n,
            });
        }
        // overlaps are reported when the layer is encoded
        spans.sort();
        Ok(spans)
    }
}

/// A validated set of labelling functions with an execution order.
#[derive(Debug, Clone)]
pub struct Pipeline {
    lfs: Vec<LabellingFunction>,
    order: Vec<usize>,
}

impl Pipeline {
    pub fn new(lfs: Vec<LabellingFunction>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, lf) in lfs.iter().enumerate() {
            if index.insert(lf.name.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "labelling function `{}` declared twice",
                    lf.name
                )));
            }
        }
        let mut deps = Vec::with_capacity(lfs.len());
        for lf in &lfs {
            let mut d = Vec::new();
            for name in &lf.depends_on {
                match index.get(name) {
                    Some(&j) => d.push(j),
                    None => {
                        return Err(Error::MissingLayer {
                            layer: name.clone(),
                            context: Some(format!("required by labelling function `{}`", lf.name)),
                        })
                    }
                }
            }
            deps.push(d);
        }
        if let Some(cycle) = find_cycle(&deps) {
            return Err(Error::CycleDetected(cycle.into_iter().map(|i| lfs[i].name.clone()).collect()));
        }
        let order = topological_order(&deps);
        Ok(Pipeline { lfs, order })
    }

    pub fn functions(&self) -> &[LabellingFunction] {
        &self.lfs
    }

    pub fn names(&self) -> Vec<String> {
        self.lfs.iter().map(|lf| lf.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.lfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lfs.is_empty()
    }

    /// Execution order as indices into [`Pipeline::functions`].
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Dependency edges, symmetrized, per function in declaration order.
    pub fn neighborhoods(&self) -> Vec<Vec<usize>> {
        neighborhoods(&self.lfs)
    }

    /// Checks that every declared label exists in `space`.
    pub fn check_labels(&self, space: &LabelSpace) -> Result<()> {
        for lf in &self.lfs {
            for l in &lf.emits {
                space.require_label(l)?;
            }
        }
        Ok(())
    }

    pub fn apply_one(&self, doc: &mut Document) -> Result<()> {
        for &i in &self.order {
            let lf = &self.lfs[i];
            let spans = lf.apply(doc)?;
            doc.set_layer(lf.name.clone(), spans);
        }
        Ok(())
    }

    /// Applies all functions to every document, documents in parallel.
    pub fn apply(&self, docs: &mut [Document]) -> Result<()> {
        docs.par_iter_mut().try_for_each(|doc| self.apply_one(doc))
    }
}

pub fn run_pipeline(docs: &mut [Document], lfs: Vec<LabellingFunction>) -> Result<Pipeline> {
    let pipeline = Pipeline::new(lfs)?;
    pipeline.apply(docs)?;
    Ok(pipeline)
}

/// Symmetrized dependency neighbourhoods by position in `lfs`. Dependencies on
/// names outside `lfs` are ignored.
pub fn neighborhoods(lfs: &[LabellingFunction]) -> Vec<Vec<usize>> {
    let index: HashMap<&str, usize> = lfs.iter().enumerate().map(|(i, lf)| (lf.name.as_str(), i)).collect();
    let mut sets = vec![BTreeSet::new(); lfs.len()];
    for (i, lf) in lfs.iter().enumerate() {
        for d in &lf.depends_on {
            if let Some(&j) = index.get(d.as_str()) {
                if j != i {
                    sets[i].insert(j);
                    sets[j].insert(i);
                }
            }
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

fn find_cycle(deps: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(v: usize, deps: &[Vec<usize>], marks: &mut [Mark], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        marks[v] = Mark::Active;
        stack.push(v);
        for &d in &deps[v] {
            match marks[d] {
                Mark::Active => {
                    let pos = stack.iter().position(|&x| x == d).unwrap_or(0);
                    let mut cycle = stack[pos..].to_vec();
                    cycle.push(d);
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(c) = visit(d, deps, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[v] = Mark::Done;
        None
    }
    let mut marks = vec![Mark::New; deps.len()];
    let mut stack = Vec::new();
    for v in 0..deps.len() {
        if marks[v] == Mark::New {
            if let Some(c) = visit(v, deps, &mut marks, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

/// Kahn's algorithm, preferring declaration order among ready functions.
fn topological_order(deps: &[Vec<usize>]) -> Vec<usize> {
    let n = deps.len();
    let mut remaining: Vec<usize> = deps.iter().map(|d| d.iter().collect::<BTreeSet<_>>().len()).collect();
    let mut dependents = vec![Vec::new(); n];
    for (i, d) in deps.iter().enumerate() {
        for &j in d.iter().collect::<BTreeSet<_>>() {
            dependents[j].push(i);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| remaining[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &k in &dependents[i] {
            remaining[k] -= 1;
            if remaining[k] == 0 {
                ready.insert(k);
            }
        }
    }
    order
}
