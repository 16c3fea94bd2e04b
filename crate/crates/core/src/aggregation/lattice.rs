//! Forward-backward and Viterbi over a first-order chain.
//!
//! Structural zeros (forbidden transitions, unsupported states) are encoded as
//! zero probabilities in `start`/`trans` and as `-inf` log-emissions. The
//! forward pass is scaled per position so long sequences do not underflow.

/// Start vector and row-major transition matrix in probability space.
#[derive(Debug, Clone)]
pub struct Chain {
    pub n_states: usize,
    pub start: Vec<f64>,
    pub trans: Vec<f64>,
    log_start: Vec<f64>,
    log_trans: Vec<f64>,
}

impl Chain {
    pub fn new(start: Vec<f64>, trans: Vec<f64>) -> Self {
        let n_states = start.len();
        assert_eq!(trans.len(), n_states * n_states, "transition matrix must be square");
        let log_start = start.iter().map(|p| p.ln()).collect();
        let log_trans = trans.iter().map(|p| p.ln()).collect();
        Chain {
            n_states,
            start,
            trans,
            log_start,
            log_trans,
        }
    }
}

/// Output of a forward-backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    pub n_states: usize,
    /// Row-major `n x S` state marginals.
    pub marginals: Vec<f64>,
    /// Expected transition counts summed over positions, `S x S`.
    pub transitions: Vec<f64>,
    pub log_likelihood: f64,
}

impl Posteriors {
    pub fn len(&self) -> usize {
        if self.n_states == 0 {
            0
        } else {
            self.marginals.len() / self.n_states
        }
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.marginals[t * self.n_states..(t + 1) * self.n_states]
    }
}

fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Returns `None` when no state sequence has positive probability.
pub fn forward_backward(chain: &Chain, log_emit: &[f64]) -> Option<Posteriors> {
    let s_n = chain.n_states;
    let n = log_emit.len() / s_n;
    if n == 0 {
        return Some(Posteriors {
            n_states: s_n,
            marginals: Vec::new(),
            transitions: vec![0.0; s_n * s_n],
            log_likelihood: 0.0,
        });
    }
    // emissions rescaled by their row maximum
    let mut emit = vec![0.0; n * s_n];
    let mut shift = vec![0.0; n];
    for t in 0..n {
        let row = &log_emit[t * s_n..(t + 1) * s_n];
        let m = row_max(row);
        if m == f64::NEG_INFINITY {
            return None;
        }
        shift[t] = m;
        for s in 0..s_n {
            emit[t * s_n + s] = (row[s] - m).exp();
        }
    }

    let mut alpha = vec![0.0; n * s_n];
    let mut scale = vec![0.0; n];
    for s in 0..s_n {
        alpha[s] = chain.start[s] * emit[s];
    }
    for t in 0..n {
        if t > 0 {
            let (prev, cur) = alpha.split_at_mut(t * s_n);
            let prev = &prev[(t - 1) * s_n..];
            let cur = &mut cur[..s_n];
            for (l, &a) in prev.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &chain.trans[l * s_n..(l + 1) * s_n];
                for k in 0..s_n {
                    cur[k] += a * row[k];
                }
            }
            for k in 0..s_n {
                cur[k] *= emit[t * s_n + k];
            }
        }
        let c: f64 = alpha[t * s_n..(t + 1) * s_n].iter().sum();
        if !(c > 0.0) || !c.is_finite() {
            return None;
        }
        scale[t] = c;
        for a in &mut alpha[t * s_n..(t + 1) * s_n] {
            *a /= c;
        }
    }

    let mut beta = vec![0.0; n * s_n];
    beta[(n - 1) * s_n..].fill(1.0);
    let mut transitions = vec![0.0; s_n * s_n];
    let mut tmp = vec![0.0; s_n];
    for t in (0..n - 1).rev() {
        let next = t + 1;
        for k in 0..s_n {
            tmp[k] = emit[next * s_n + k] * beta[next * s_n + k] / scale[next];
        }
        for l in 0..s_n {
            let row = &chain.trans[l * s_n..(l + 1) * s_n];
            let a = alpha[t * s_n + l];
            let mut b = 0.0;
            for k in 0..s_n {
                let v = row[k] * tmp[k];
                b += v;
                transitions[l * s_n + k] += a * v;
            }
            beta[t * s_n + l] = b;
        }
    }

    let mut marginals = alpha;
    for t in 0..n {
        let row = &mut marginals[t * s_n..(t + 1) * s_n];
        let mut z = 0.0;
        for (s, m) in row.iter_mut().enumerate() {
            *m *= beta[t * s_n + s];
            z += *m;
        }
        for m in row.iter_mut() {
            *m /= z;
        }
    }
    let log_likelihood = scale.iter().zip(&shift).map(|(c, m)| c.ln() + m).sum();
    Some(Posteriors {
        n_states: s_n,
        marginals,
        transitions,
        log_likelihood,
    })
}

/// Most probable state sequence and its log score. Ties go to the lowest
/// state index. Returns `None` when every sequence has zero probability.
pub fn viterbi(chain: &Chain, log_emit: &[f64]) -> Option<(Vec<usize>, f64)> {
    let s_n = chain.n_states;
    let n = log_emit.len() / s_n;
    if n == 0 {
        return Some((Vec::new(), 0.0));
    }
    let mut delta: Vec<f64> = (0..s_n).map(|s| chain.log_start[s] + log_emit[s]).collect();
    let mut back = vec![0usize; n * s_n];
    let mut next = vec![0.0; s_n];
    for t in 1..n {
        for k in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for l in 0..s_n {
                let v = delta[l] + chain.log_trans[l * s_n + k];
                if v > best {
                    best = v;
                    arg = l;
                }
            }
            next[k] = best + log_emit[t * s_n + k];
            back[t * s_n + k] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut best = f64::NEG_INFINITY;
    let mut last = 0;
    for (s, &v) in delta.iter().enumerate() {
        if v > best {
            best = v;
            last = s;
        }
    }
    if best == f64::NEG_INFINITY {
        return None;
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t * s_n + path[t]];
    }
    Some((path, best))
}
