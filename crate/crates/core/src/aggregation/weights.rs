//! Redundancy-based tempering weights.
//!
//! `R[j][l][k]` is the recall of function `j` against function `l` on symbol
//! `k`: the share of positions where `l` emits `k` at which `j` emits `k` too.
//! The weight of `j` on `k` is `exp(-gamma * sum over neighbours l of R[j][l][k])`,
//! so a function that mostly repeats what a correlated function says is
//! flattened towards uniform.

use super::observations::ObservationMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RecallTensor {
    n_lfs: usize,
    n_symbols: usize,
    data: Vec<f64>,
}

impl RecallTensor {
    #[inline]
    pub fn get(&self, j: usize, l: usize, k: usize) -> f64 {
        self.data[(j * self.n_lfs + l) * self.n_symbols + k]
    }

    pub fn n_lfs(&self) -> usize {
        self.n_lfs
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }
}

/// Recall tensor over all positions of a corpus. VOID entries and entries
/// with zero denominator are 0.
pub fn compute_recall(corpus: &[ObservationMatrix], n_lfs: usize, n_symbols: usize) -> RecallTensor {
    let mut joint = vec![0u64; n_lfs * n_lfs * n_symbols];
    let mut emitted = vec![0u64; n_lfs * n_symbols];
    for obs in corpus {
        debug_assert_eq!(obs.n_lfs(), n_lfs);
        for i in 0..obs.n_rows() {
            let row = obs.row(i);
            for (l, &k) in row.iter().enumerate() {
                let k = k as usize;
                if k == 0 {
                    continue;
                }
                emitted[l * n_symbols + k] += 1;
                for (j, &kj) in row.iter().enumerate() {
                    if kj as usize == k {
                        joint[(j * n_lfs + l) * n_symbols + k] += 1;
                    }
                }
            }
        }
    }
    let mut data = vec![0.0; joint.len()];
    for j in 0..n_lfs {
        for l in 0..n_lfs {
            for k in 1..n_symbols {
                let denom = emitted[l * n_symbols + k];
                if denom > 0 {
                    let idx = (j * n_lfs + l) * n_symbols + k;
                    data[idx] = joint[idx] as f64 / denom as f64;
                }
            }
        }
    }
    RecallTensor {
        n_lfs,
        n_symbols,
        data,
    }
}

/// `J x L` weight matrix. The VOID column is fixed to 1.
pub fn compute_weights(recall: &RecallTensor, neighborhoods: &[Vec<usize>], gamma: f64) -> Result<Vec<Vec<f64>>> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::NegativeGamma(gamma));
    }
    if neighborhoods.len() != recall.n_lfs {
        return Err(Error::InvalidConfig(format!(
            "{} neighbourhoods for {} labelling functions",
            neighborhoods.len(),
            recall.n_lfs
        )));
    }
    let mut weights = vec![vec![1.0; recall.n_symbols]; recall.n_lfs];
    for (j, hood) in neighborhoods.iter().enumerate() {
        if let Some(&bad) = hood.iter().find(|&&l| l == j || l >= recall.n_lfs) {
            return Err(Error::InvalidConfig(format!(
                "invalid neighbour {bad} for labelling function {j}"
            )));
        }
        for k in 1..recall.n_symbols {
            let total: f64 = hood.iter().map(|&l| recall.get(j, l, k)).sum();
            weights[j][k] = (-gamma * total).exp();
        }
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_counts() {
        // symbol 1 = B-X; lf1 emits at tokens 1,2; lf0 at token 1
        let obs = ObservationMatrix::from_rows(&[vec![0, 0], vec![1, 1], vec![0, 1], vec![2, 0]]);
        let r = compute_recall(&[obs], 2, 3);
        assert_eq!(r.get(0, 1, 1), 0.5);
        assert_eq!(r.get(1, 0, 1), 1.0);
        assert_eq!(r.get(0, 0, 1), 1.0);
        assert_eq!(r.get(1, 1, 1), 1.0);
        // lf1 never emits symbol 2
        assert_eq!(r.get(0, 1, 2), 0.0);
        assert_eq!(r.get(0, 0, 2), 1.0);
        assert_eq!(r.get(0, 1, 0), 0.0);
    }

    #[test]
    fn identical_columns() {
        let obs = ObservationMatrix::from_rows(&[vec![1, 1], vec![2, 2], vec![0, 0]]);
        let r = compute_recall(&[obs], 2, 3);
        for k in 1..3 {
            assert_eq!(r.get(0, 1, k), 1.0);
            assert_eq!(r.get(1, 0, k), 1.0);
        }
    }

    #[test]
    fn weight_formula() {
        let obs = ObservationMatrix::from_rows(&[vec![1, 1], vec![2, 0]]);
        let r = compute_recall(&[obs], 2, 3);
        let w = compute_weights(&r, &[vec![1], vec![0]], 0.3).unwrap();
        assert!((w[0][1] - (-0.3f64).exp()).abs() < 1e-15);
        assert!((w[0][1] - 0.740818).abs() < 1e-6);
        assert_eq!(w[0][0], 1.0);
        // lf1 never emits symbol 2 -> zero recall
        assert_eq!(w[0][2], 1.0);

        let none = compute_weights(&r, &[vec![], vec![]], 0.3).unwrap();
        assert!(none.iter().flatten().all(|&x| x == 1.0));
        let zero = compute_weights(&r, &[vec![1], vec![0]], 0.0).unwrap();
        assert!(zero.iter().flatten().all(|&x| x == 1.0));

        assert!(matches!(compute_weights(&r, &[vec![1], vec![0]], -1.0), Err(Error::NegativeGamma(_))));
        assert!(compute_weights(&r, &[vec![0], vec![]], 0.3).is_err());
    }

    #[test]
    fn monotone_in_gamma() {
        let obs = ObservationMatrix::from_rows(&[vec![1, 1], vec![1, 0], vec![0, 1]]);
        let r = compute_recall(&[obs], 2, 2);
        let hood = [vec![1], vec![0]];
        let mut last = 1.0;
        for g in [0.1, 0.2, 0.5, 1.0, 3.0] {
            let w = compute_weights(&r, &hood, g).unwrap()[0][1];
            assert!(w < last);
            last = w;
        }
    }
}
