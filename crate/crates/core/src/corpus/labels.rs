//! Label space: concrete labels, underspecified labels and the two alphabets
//! derived from them (latent states and observed symbols).

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VOID: &str = "VOID";
pub const OUTSIDE: &str = "O";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Sequence,
    Classification,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sequence => "sequence",
            Mode::Classification => "classification",
        }
    }
}

/// Index into the label list of a [`LabelSpace`]. Concrete labels come first,
/// followed by the underspecified ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(pub usize);

/// A hidden state of the aggregation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatentState {
    Outside,
    Begin(LabelId),
    Inside(LabelId),
    Class(LabelId),
}

/// A symbol emitted by a labelling function at one position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObservedSymbol {
    Void,
    Begin(LabelId),
    Inside(LabelId),
    Class(LabelId),
}

/// Serializable declaration of a label space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct LabelSpaceDecl {
    #[serde(default)]
    pub mode: Mode,
    pub concrete: Vec<String>,
    #[serde(default)]
    pub underspecified: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct LabelSpace {
    decl: LabelSpaceDecl,
    labels: Vec<String>,
    index: HashMap<String, LabelId>,
    /// Specialization set of every label, as sorted concrete ids.
    specs: Vec<Vec<LabelId>>,
    latent: Vec<LatentState>,
    observed: Vec<ObservedSymbol>,
    latent_names: Vec<String>,
    observed_names: Vec<String>,
    /// Row-major |L| x |S| compatibility table.
    compat: Vec<bool>,
}

impl PartialEq for LabelSpace {
    fn eq(&self, other: &Self) -> bool {
        self.decl == other.decl
    }
}

fn reserved(name: &str) -> bool {
    name == VOID || name == OUTSIDE
}

impl LabelSpace {
    pub fn new(decl: LabelSpaceDecl) -> Result<Self> {
        if decl.concrete.is_empty() {
            return Err(Error::InvalidLabelSpace("no concrete labels declared".into()));
        }
        let mut labels = Vec::new();
        let mut index = HashMap::new();
        for name in decl.concrete.iter().chain(decl.underspecified.keys()) {
            if name.is_empty() || reserved(name) {
                return Err(Error::InvalidLabelSpace(format!("label name `{name}` is reserved")));
            }
            if index.insert(name.clone(), LabelId(labels.len())).is_some() {
                return Err(Error::InvalidLabelSpace(format!("label `{name}` declared twice")));
            }
            labels.push(name.clone());
        }
        let n_concrete = decl.concrete.len();
        let mut specs: Vec<Vec<LabelId>> = (0..n_concrete).map(|c| vec![LabelId(c)]).collect();
        for (name, members) in &decl.underspecified {
            if members.is_empty() {
                return Err(Error::InvalidLabelSpace(format!(
                    "underspecified label `{name}` has no members"
                )));
            }
            let mut ids = Vec::with_capacity(members.len());
            for m in members {
                match index.get(m) {
                    Some(&id) if id.0 < n_concrete => ids.push(id),
                    _ => {
                        return Err(Error::InvalidLabelSpace(format!(
                            "underspecified label `{name}` refers to `{m}`, which is not a concrete label"
                        )))
                    }
                }
            }
            ids.sort();
            ids.dedup();
            specs.push(ids);
        }

        let (latent, observed) = match decl.mode {
            Mode::Sequence => {
                let mut latent = vec![LatentState::Outside];
                for c in 0..n_concrete {
                    latent.push(LatentState::Begin(LabelId(c)));
                    latent.push(LatentState::Inside(LabelId(c)));
                }
                let mut observed = vec![ObservedSymbol::Void];
                for x in 0..labels.len() {
                    observed.push(ObservedSymbol::Begin(LabelId(x)));
                    observed.push(ObservedSymbol::Inside(LabelId(x)));
                }
                (latent, observed)
            }
            Mode::Classification => {
                let latent = (0..n_concrete).map(|c| LatentState::Class(LabelId(c))).collect();
                let mut observed = vec![ObservedSymbol::Void];
                observed.extend((0..labels.len()).map(|x| ObservedSymbol::Class(LabelId(x))));
                (latent, observed)
            }
        };

        let mut space = LabelSpace {
            decl,
            labels,
            index,
            specs,
            latent,
            observed,
            latent_names: Vec::new(),
            observed_names: Vec::new(),
            compat: Vec::new(),
        };
        space.latent_names = space.latent.iter().map(|&s| space.latent_name(s)).collect();
        space.observed_names = space.observed.iter().map(|&o| space.observed_name(o)).collect();
        let mut compat = Vec::with_capacity(space.observed.len() * space.latent.len());
        for &o in &space.observed {
            for &s in &space.latent {
                compat.push(space.compatible(o, s));
            }
        }
        space.compat = compat;
        Ok(space)
    }

    pub fn sequence(concrete: &[&str], underspecified: &[(&str, &[&str])]) -> Result<Self> {
        Self::from_parts(Mode::Sequence, concrete, underspecified)
    }

    pub fn classification(concrete: &[&str], underspecified: &[(&str, &[&str])]) -> Result<Self> {
        Self::from_parts(Mode::Classification, concrete, underspecified)
    }

    fn from_parts(mode: Mode, concrete: &[&str], underspecified: &[(&str, &[&str])]) -> Result<Self> {
        Self::new(LabelSpaceDecl {
            mode,
            concrete: concrete.iter().map(|s| s.to_string()).collect(),
            underspecified: underspecified
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        })
    }

    pub fn decl(&self) -> &LabelSpaceDecl {
        &self.decl
    }

    pub fn mode(&self) -> Mode {
        self.decl.mode
    }

    pub fn n_concrete(&self) -> usize {
        self.decl.concrete.len()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.index.get(name).copied()
    }

    pub fn require_label(&self, name: &str) -> Result<LabelId> {
        self.label_id(name).ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn label_name(&self, id: LabelId) -> &str {
        &self.labels[id.0]
    }

    pub fn is_concrete(&self, id: LabelId) -> bool {
        id.0 < self.n_concrete()
    }

    /// Concrete labels a label may stand for; `{c}` for concrete `c`.
    pub fn specialization(&self, id: LabelId) -> &[LabelId] {
        &self.specs[id.0]
    }

    /// Whether concrete label `concrete` belongs to the specialization set of `label`.
    pub fn covers(&self, label: LabelId, concrete: LabelId) -> bool {
        self.specs[label.0].binary_search(&concrete).is_ok()
    }

    pub fn n_states(&self) -> usize {
        self.latent.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.observed.len()
    }

    pub fn states(&self) -> &[LatentState] {
        &self.latent
    }

    pub fn symbols(&self) -> &[ObservedSymbol] {
        &self.observed
    }

    pub fn state_names(&self) -> &[String] {
        &self.latent_names
    }

    pub fn symbol_names(&self) -> &[String] {
        &self.observed_names
    }

    pub fn state(&self, idx: usize) -> LatentState {
        self.latent[idx]
    }

    pub fn symbol(&self, idx: usize) -> ObservedSymbol {
        self.observed[idx]
    }

    pub fn state_index(&self, state: LatentState) -> Option<usize> {
        match (self.mode(), state) {
            (Mode::Sequence, LatentState::Outside) => Some(0),
            (Mode::Sequence, LatentState::Begin(c)) if self.is_concrete(c) => Some(1 + 2 * c.0),
            (Mode::Sequence, LatentState::Inside(c)) if self.is_concrete(c) => Some(2 + 2 * c.0),
            (Mode::Classification, LatentState::Class(c)) if self.is_concrete(c) => Some(c.0),
            _ => None,
        }
    }

    pub fn symbol_index(&self, symbol: ObservedSymbol) -> Option<usize> {
        let n = self.n_labels();
        match (self.mode(), symbol) {
            (_, ObservedSymbol::Void) => Some(0),
            (Mode::Sequence, ObservedSymbol::Begin(x)) if x.0 < n => Some(1 + 2 * x.0),
            (Mode::Sequence, ObservedSymbol::Inside(x)) if x.0 < n => Some(2 + 2 * x.0),
            (Mode::Classification, ObservedSymbol::Class(x)) if x.0 < n => Some(1 + x.0),
            _ => None,
        }
    }

    pub fn latent_name(&self, state: LatentState) -> String {
        match state {
            LatentState::Outside => OUTSIDE.to_string(),
            LatentState::Begin(c) => format!("B-{}", self.label_name(c)),
            LatentState::Inside(c) => format!("I-{}", self.label_name(c)),
            LatentState::Class(c) => self.label_name(c).to_string(),
        }
    }

    pub fn observed_name(&self, symbol: ObservedSymbol) -> String {
        match symbol {
            ObservedSymbol::Void => VOID.to_string(),
            ObservedSymbol::Begin(x) => format!("B-{}", self.label_name(x)),
            ObservedSymbol::Inside(x) => format!("I-{}", self.label_name(x)),
            ObservedSymbol::Class(x) => self.label_name(x).to_string(),
        }
    }

    /// Whether an observed symbol is consistent with a latent state. VOID is
    /// consistent with everything; otherwise the BIO prefixes must agree and
    /// the state's label must lie in the symbol label's specialization set.
    pub fn compatible(&self, observed: ObservedSymbol, latent: LatentState) -> bool {
        match (observed, latent) {
            (ObservedSymbol::Void, _) => true,
            (ObservedSymbol::Begin(x), LatentState::Begin(c))
            | (ObservedSymbol::Inside(x), LatentState::Inside(c))
            | (ObservedSymbol::Class(x), LatentState::Class(c)) => self.covers(x, c),
            _ => false,
        }
    }

    /// Table lookup version of [`LabelSpace::compatible`] on alphabet indices.
    #[inline]
    pub fn compatible_idx(&self, symbol: usize, state: usize) -> bool {
        self.compat[symbol * self.latent.len() + state]
    }

    /// Label carried by a latent state, if any.
    pub fn state_label(&self, idx: usize) -> Option<LabelId> {
        match self.latent[idx] {
            LatentState::Outside => None,
            LatentState::Begin(c) | LatentState::Inside(c) | LatentState::Class(c) => Some(c),
        }
    }

    /// Label carried by an observed symbol, if any.
    pub fn symbol_label(&self, idx: usize) -> Option<LabelId> {
        match self.observed[idx] {
            ObservedSymbol::Void => None,
            ObservedSymbol::Begin(x) | ObservedSymbol::Inside(x) | ObservedSymbol::Class(x) => Some(x),
        }
    }
}

impl fmt::Display for LabelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mode, labels [{}]", self.mode().name(), self.labels.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ner() -> LabelSpace {
        LabelSpace::sequence(
            &["PERSON", "ORG", "LOC", "MONEY", "DATE"],
            &[("ENT", &["PERSON", "ORG", "LOC"])],
        )
        .unwrap()
    }

    #[test]
    fn alphabet_sizes() {
        let space = ner();
        assert_eq!(space.n_states(), 2 * 5 + 1);
        assert_eq!(space.n_symbols(), 1 + 2 * 6);
        assert_eq!(space.symbol_names()[0], VOID);
        assert_eq!(space.state_names()[0], OUTSIDE);
        assert!(space.n_symbols() >= space.n_states() - space.n_concrete() + 1);

        let cls = LabelSpace::classification(&["POS", "NEG", "NEU"], &[("NOT_POS", &["NEG", "NEU"])])
            .unwrap();
        assert_eq!(cls.n_states(), 3);
        assert_eq!(cls.n_symbols(), 5);
        assert_eq!(cls.symbol_names()[0], VOID);
    }

    #[test]
    fn compatibility() {
        let space = ner();
        let ent = space.label_id("ENT").unwrap();
        let person = space.label_id("PERSON").unwrap();
        let money = space.label_id("MONEY").unwrap();
        assert!(space.compatible(ObservedSymbol::Begin(ent), LatentState::Begin(person)));
        assert!(!space.compatible(ObservedSymbol::Begin(ent), LatentState::Begin(money)));
        assert!(space.compatible(ObservedSymbol::Void, LatentState::Inside(money)));
        assert!(!space.compatible(ObservedSymbol::Begin(person), LatentState::Inside(person)));
        assert!(!space.compatible(ObservedSymbol::Begin(person), LatentState::Outside));

        for s in 0..space.n_states() {
            for o in 0..space.n_symbols() {
                assert_eq!(
                    space.compatible_idx(o, s),
                    space.compatible(space.symbol(o), space.state(s))
                );
            }
        }
    }

    #[test]
    fn classification_ignores_prefix() {
        let cls = LabelSpace::classification(&["POS", "NEG", "NEU"], &[("NOT_POS", &["NEG", "NEU"])])
            .unwrap();
        let not_pos = cls.label_id("NOT_POS").unwrap();
        let neg = cls.label_id("NEG").unwrap();
        let pos = cls.label_id("POS").unwrap();
        assert!(cls.compatible(ObservedSymbol::Class(not_pos), LatentState::Class(neg)));
        assert!(!cls.compatible(ObservedSymbol::Class(not_pos), LatentState::Class(pos)));
    }

    #[test]
    fn index_round_trip() {
        let space = ner();
        for (i, &s) in space.states().iter().enumerate() {
            assert_eq!(space.state_index(s), Some(i));
        }
        for (i, &o) in space.symbols().iter().enumerate() {
            assert_eq!(space.symbol_index(o), Some(i));
        }
        let ent = space.label_id("ENT").unwrap();
        assert_eq!(space.state_index(LatentState::Begin(ent)), None);
    }

    #[test]
    fn rejects_bad_declarations() {
        assert!(LabelSpace::sequence(&[], &[]).is_err());
        assert!(LabelSpace::sequence(&["A", "A"], &[]).is_err());
        assert!(LabelSpace::sequence(&["A"], &[("A", &["A"])]).is_err());
        assert!(LabelSpace::sequence(&["A"], &[("X", &[])]).is_err());
        assert!(LabelSpace::sequence(&["A"], &[("X", &["B"])]).is_err());
        assert!(LabelSpace::sequence(&["O"], &[]).is_err());
        assert!(LabelSpace::sequence(&["A"], &[("X", &["A"]), ("Y", &["X"])]).is_err());
    }
}
