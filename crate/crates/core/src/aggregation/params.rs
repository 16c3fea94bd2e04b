use serde::{Deserialize, Serialize};

use super::majority::majority_vote;
use super::observations::ObservationMatrix;
use super::weights::{compute_recall, compute_weights};
use crate::corpus::LabelSpace;
use crate::error::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-9;

/// Hyperparameters for initialisation and EM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Strength of the redundancy weighting; 0 disables tempering.
    pub gamma: f64,
    /// Additive smoothing applied to every count table.
    pub alpha: f64,
    /// Relative objective change below which EM stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gamma: 0.3,
            alpha: 0.1,
            tol: 1e-4,
            max_iter: 50,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::NegativeGamma(self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Parameters of the aggregation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    /// Initial state distribution, length S.
    pub start: Vec<f64>,
    /// Row-stochastic S x S transition matrix.
    pub transitions: Vec<Vec<f64>>,
    /// Per function, an S x L row-stochastic emission matrix.
    pub emissions: Vec<Vec<Vec<f64>>>,
    /// Per function, a length-L vector of tempering weights in (0, 1].
    pub weights: Vec<Vec<f64>>,
    pub gamma: f64,
    pub alpha: f64,
}

fn check_distribution(what: &str, row: &[f64], len: usize) -> Result<()> {
    if row.len() != len {
        return Err(Error::InvalidParams(format!("{what} has length {}, expected {len}", row.len())));
    }
    if let Some(p) = row.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParams(format!("{what} has non-positive entry {p}")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::InvalidParams(format!("{what} sums to {total}")));
    }
    Ok(())
}

pub(crate) fn normalize_counts(counts: &[f64], alpha: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + alpha * counts.len() as f64;
    counts.iter().map(|c| (c + alpha) / total).collect()
}

impl HmmParams {
    pub fn n_states(&self) -> usize {
        self.start.len()
    }

    pub fn n_lfs(&self) -> usize {
        self.emissions.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Checks shapes against the label space and the probability constraints.
    pub fn validate(&self, space: &LabelSpace, n_lfs: usize) -> Result<()> {
        let (s_n, l_n) = (space.n_states(), space.n_symbols());
        check_distribution("start distribution", &self.start, s_n)?;
        if self.transitions.len() != s_n {
            return Err(Error::InvalidParams(format!("{} transition rows, expected {s_n}", self.transitions.len())));
        }
        for (s, row) in self.transitions.iter().enumerate() {
            check_distribution(&format!("transition row {s}"), row, s_n)?;
        }
        if self.emissions.len() != n_lfs || self.weights.len() != n_lfs {
            return Err(Error::InvalidParams(format!(
                "parameters cover {} functions, expected {n_lfs}",
                self.emissions.len()
            )));
        }
        for (j, (em, w)) in self.emissions.iter().zip(&self.weights).enumerate() {
            if em.len() != s_n {
                return Err(Error::InvalidParams(format!("emission matrix {j} has {} rows", em.len())));
            }
            for (s, row) in em.iter().enumerate() {
                check_distribution(&format!("emission row ({j}, {s})"), row, l_n)?;
            }
            if w.len() != l_n || w.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                return Err(Error::InvalidParams(format!("weights of function {j} are outside (0, 1]")));
            }
            if w[0] != 1.0 {
                return Err(Error::InvalidParams(format!("VOID weight of function {j} must be 1")));
            }
        }
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::NegativeGamma(self.gamma));
        }
        Ok(())
    }
}

/// Initial parameters from majority-vote counts plus `alpha` smoothing;
/// weights from the corpus recall tensor.
pub fn init_from_majority(
    corpus: &[ObservationMatrix],
    space: &LabelSpace,
    neighborhoods: &[Vec<usize>],
    options: &FitOptions,
) -> Result<HmmParams> {
    options.validate()?;
    if corpus.iter().all(|o| o.n_rows() == 0) {
        return Err(Error::EmptyCorpus);
    }
    let n_lfs = corpus[0].n_lfs();
    let (s_n, l_n) = (space.n_states(), space.n_symbols());
    let mut start = vec![0.0; s_n];
    let mut trans = vec![vec![0.0; s_n]; s_n];
    let mut emit = vec![vec![vec![0.0; l_n]; s_n]; n_lfs];
    for obs in corpus {
        if obs.n_lfs() != n_lfs {
            return Err(Error::InvalidParams("documents disagree on the number of functions".into()));
        }
        let voted = majority_vote(obs, space);
        if let Some(&first) = voted.first() {
            start[first] += 1.0;
        }
        for w in voted.windows(2) {
            trans[w[0]][w[1]] += 1.0;
        }
        for (i, &s) in voted.iter().enumerate() {
            for (j, &k) in obs.row(i).iter().enumerate() {
                emit[j][s][k as usize] += 1.0;
            }
        }
    }
    let alpha = options.alpha;
    let recall = compute_recall(corpus, n_lfs, l_n);
    let weights = compute_weights(&recall, neighborhoods, options.gamma)?;
    Ok(HmmParams {
        start: normalize_counts(&start, alpha),
        transitions: trans.iter().map(|r| normalize_counts(r, alpha)).collect(),
        emissions: emit
            .iter()
            .map(|m| m.iter().map(|r| normalize_counts(r, alpha)).collect())
            .collect(),
        weights,
        gamma: options.gamma,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> LabelSpace {
        LabelSpace::sequence(&["X"], &[]).unwrap()
    }

    #[test]
    fn single_token_document() {
        let sp = space();
        // one token, one function voting B-X (symbol 1)
        let obs = ObservationMatrix::from_rows(&[vec![1]]);
        let p = init_from_majority(&[obs], &sp, &[vec![]], &FitOptions::default()).unwrap();
        p.validate(&sp, 1).unwrap();
        let a = 0.1;
        assert!((p.start[1] - (1.0 + a) / (1.0 + 3.0 * a)).abs() < 1e-15);
        assert!((p.start[0] - a / (1.0 + 3.0 * a)).abs() < 1e-15);
        assert!(p.start[1] > p.start[0] && p.start[1] > p.start[2]);
        for row in &p.transitions {
            assert!(row.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        }
        assert!((p.emissions[0][1][1] - (1.0 + a) / (1.0 + 3.0 * a)).abs() < 1e-15);
    }

    #[test]
    fn smoothing_floor() {
        let sp = space();
        let obs = ObservationMatrix::from_rows(&[vec![1, 0], vec![2, 2], vec![0, 0], vec![0, 1]]);
        let opts = FitOptions::default();
        let p = init_from_majority(&[obs], &sp, &[vec![], vec![]], &opts).unwrap();
        p.validate(&sp, 2).unwrap();
        // 4 tokens, at most 4 counts in any row
        let floor = opts.alpha / (4.0 + opts.alpha * 3.0);
        let all = p.start.iter().chain(p.transitions.iter().flatten()).chain(p.emissions.iter().flatten().flatten());
        for &x in all {
            assert!(x >= floor - 1e-15);
        }
    }

    #[test]
    fn duplicated_documents() {
        let sp = space();
        let doc = ObservationMatrix::from_rows(&[vec![1, 0], vec![2, 2], vec![0, 0]]);
        let doubled = ObservationMatrix::from_rows(&[vec![1, 0], vec![2, 2], vec![0, 0], vec![1, 0], vec![2, 2], vec![0, 0]]);
        let opts = FitOptions::default();
        let a = opts.alpha;
        let two = init_from_majority(&[doc.clone(), doc], &sp, &[vec![], vec![]], &opts).unwrap();
        // votes per copy: B-X, I-X, O. Doubled counts: start B-X = 2,
        // B-X -> I-X = 2, I-X -> O = 2.
        let z = 2.0 + 3.0 * a;
        let expect_start = [a / z, (2.0 + a) / z, a / z];
        let expect_b = [a / z, a / z, (2.0 + a) / z];
        let expect_i = [(2.0 + a) / z, a / z, a / z];
        for (got, want) in [(&two.start, &expect_start), (&two.transitions[1], &expect_b), (&two.transitions[2], &expect_i)] {
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() < 1e-15);
            }
        }
        // emission counts of the two copies equal those of one concatenated document
        let merged = init_from_majority(&[doubled], &sp, &[vec![], vec![]], &opts).unwrap();
        assert_eq!(two.emissions, merged.emissions);
    }

    #[test]
    fn errors() {
        let sp = space();
        assert!(matches!(init_from_majority(&[], &sp, &[], &FitOptions::default()), Err(Error::EmptyCorpus)));
        let obs = ObservationMatrix::from_rows(&[vec![1]]);
        let bad = FitOptions { gamma: -0.1, ..Default::default() };
        assert!(matches!(init_from_majority(&[obs.clone()], &sp, &[vec![]], &bad), Err(Error::NegativeGamma(_))));
        let bad = FitOptions { alpha: 0.0, ..Default::default() };
        assert!(init_from_majority(&[obs], &sp, &[vec![]], &bad).is_err());
    }
}
