use crate::corpus::{encode_bio, Document, LabelSpace, Mode, ObservedSymbol};
use crate::error::{Error, Result};

/// Observed-symbol indices for one document: one row per token (a single row
/// in classification mode), one column per labelling function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMatrix {
    n_rows: usize,
    n_lfs: usize,
    data: Vec<u32>,
}

impl ObservationMatrix {
    pub fn new(n_rows: usize, n_lfs: usize) -> Self {
        ObservationMatrix {
            n_rows,
            n_lfs,
            data: vec![0; n_rows * n_lfs],
        }
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Self {
        let n_lfs = rows.first().map_or(0, Vec::len);
        let mut m = ObservationMatrix::new(rows.len(), n_lfs);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n_lfs, "ragged observation rows");
            for (j, &k) in r.iter().enumerate() {
                m.set(i, j, k);
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_lfs(&self) -> usize {
        self.n_lfs
    }

    #[inline]
    pub fn get(&self, row: usize, lf: usize) -> usize {
        self.data[row * self.n_lfs + lf] as usize
    }

    #[inline]
    pub fn set(&mut self, row: usize, lf: usize, symbol: usize) {
        self.data[row * self.n_lfs + lf] = symbol as u32;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u32] {
        &self.data[row * self.n_lfs..(row + 1) * self.n_lfs]
    }

    pub fn column(&self, lf: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_rows).map(move |i| self.get(i, lf))
    }

    /// Row-major `n x S` support mask: a non-O state is admissible at a
    /// position only if some function emitted a compatible symbol there. The
    /// O state is always admissible. In classification mode a document on
    /// which every function abstains admits every class.
    pub fn support(&self, space: &LabelSpace) -> Vec<bool> {
        let s_n = space.n_states();
        let mut mask = vec![false; self.n_rows * s_n];
        for i in 0..self.n_rows {
            let row = &mut mask[i * s_n..(i + 1) * s_n];
            let mut any_vote = false;
            for &k in self.row(i) {
                if k == 0 {
                    continue;
                }
                any_vote = true;
                for (s, m) in row.iter_mut().enumerate() {
                    *m |= space.compatible_idx(k as usize, s);
                }
            }
            match space.mode() {
                Mode::Sequence => row[0] = true,
                Mode::Classification if !any_vote => row.fill(true),
                Mode::Classification => {}
            }
        }
        mask
    }
}

/// Column `j` is taken from the layer named `lf_names[j]`.
pub fn build_observations(doc: &Document, lf_names: &[String], space: &LabelSpace) -> Result<ObservationMatrix> {
    match space.mode() {
        Mode::Sequence => {
            let n = doc.tokens.len();
            let mut obs = ObservationMatrix::new(n, lf_names.len());
            for (j, name) in lf_names.iter().enumerate() {
                let tags = encode_bio(doc.require_layer(name)?, n, space)?;
                for (i, tag) in tags.into_iter().enumerate() {
                    let k = space
                        .symbol_index(tag.observed())
                        .expect("encoded tags are in the observed alphabet");
                    obs.set(i, j, k);
                }
            }
            Ok(obs)
        }
        Mode::Classification => {
            let mut obs = ObservationMatrix::new(1, lf_names.len());
            for (j, name) in lf_names.iter().enumerate() {
                let spans = doc.require_layer(name)?;
                let Some(first) = spans.first() else { continue };
                if let Some(other) = spans.iter().find(|s| s.label != first.label) {
                    return Err(Error::ConflictingClassVotes {
                        lf: name.clone(),
                        first: first.label.clone(),
                        second: other.label.clone(),
                    });
                }
                let id = space.require_label(&first.label)?;
                let k = space.symbol_index(ObservedSymbol::Class(id)).expect("label in space");
                obs.set(0, j, k);
            }
            Ok(obs)
        }
    }
}

/// Builds observation matrices for a whole corpus.
pub fn build_corpus_observations(docs: &[Document], lf_names: &[String], space: &LabelSpace) -> Result<Vec<ObservationMatrix>> {
    use rayon::prelude::*;
    docs.par_iter().map(|d| build_observations(d, lf_names, space)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    fn space() -> LabelSpace {
        LabelSpace::sequence(&["PERSON", "DATE", "MONEY"], &[("ENT", &["PERSON"])]).unwrap()
    }

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn columns_follow_layers() {
        let sp = space();
        let mut doc = Document::from_whitespace("ex", "Donald Trump paid $ 750 in federal income taxes in 2016");
        doc.set_layer("money", vec![Span::new(3, 5, "MONEY")]);
        doc.set_layer("years", vec![Span::new(10, 11, "DATE")]);
        doc.set_layer("presidents", vec![Span::new(0, 2, "PERSON")]);
        let obs = build_observations(&doc, &names(&["money", "years", "presidents"]), &sp).unwrap();
        let col = |j| obs.column(j).map(|k| sp.symbol_names()[k].clone()).collect::<Vec<_>>();
        assert_eq!(&col(0)[..6], ["VOID", "VOID", "VOID", "B-MONEY", "I-MONEY", "VOID"]);
        assert_eq!(&col(2)[..3], ["B-PERSON", "I-PERSON", "VOID"]);
        assert_eq!(col(1)[10], "B-DATE");

        let mask = obs.support(&sp);
        let s_n = sp.n_states();
        // token 5 has no votes: only O
        assert_eq!(&mask[5 * s_n..6 * s_n], &[true, false, false, false, false, false, false]);
        // token 0: O and B-PERSON
        assert!(mask[0] && mask[1] && !mask[2]);
    }

    #[test]
    fn all_void_and_errors() {
        let sp = space();
        let mut doc = Document::from_whitespace("d", "a b c");
        doc.set_layer("x", vec![]);
        let obs = build_observations(&doc, &names(&["x"]), &sp).unwrap();
        assert!(obs.column(0).all(|k| k == 0));
        assert!(matches!(
            build_observations(&doc, &names(&["y"]), &sp),
            Err(Error::MissingLayer { .. })
        ));
        doc.set_layer("x", vec![Span::new(0, 2, "DATE"), Span::new(1, 3, "DATE")]);
        assert!(matches!(
            build_observations(&doc, &names(&["x"]), &sp),
            Err(Error::OverlappingSpans { .. })
        ));
    }

    #[test]
    fn classification_rows() {
        let sp = LabelSpace::classification(&["POS", "NEG"], &[]).unwrap();
        let mut doc = Document::from_whitespace("d", "good stuff");
        doc.set_layer("a", vec![Span::new(0, 2, "POS")]);
        doc.set_layer("b", vec![]);
        doc.set_layer("c", vec![Span::new(0, 1, "NEG"), Span::new(1, 2, "POS")]);
        let obs = build_observations(&doc, &names(&["a", "b"]), &sp).unwrap();
        assert_eq!(obs.row(0), &[1, 0]);
        assert_eq!(obs.support(&sp), vec![true, false]);
        assert!(matches!(
            build_observations(&doc, &names(&["c"]), &sp),
            Err(Error::ConflictingClassVotes { .. })
        ));
        let void = ObservationMatrix::new(1, 2);
        assert_eq!(void.support(&sp), vec![true, true]);
    }
}
