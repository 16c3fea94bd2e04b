//! HMM over true labels with one tempered multinomial emission per
//! labelling function.
//!
//! For function `j` in state `s` the emission density of symbol `k` is
//! `P[j][s][k]^w[j][k] / Z[j][s]` with `Z[j][s] = sum over k' of P[j][s][k']^w[j][k']`.
//! When every weight of a function is 1 the density is the plain multinomial
//! and `Z` is skipped.
//!
//! EM maximises the log-likelihood plus the log-density of the symmetric
//! Dirichlet prior implied by additive smoothing (`alpha * sum of log
//! parameters`). That penalised objective is what the trace reports and what
//! increases monotonically.

use rayon::prelude::*;

use super::lattice::{self, Chain, Posteriors};
use super::observations::ObservationMatrix;
use super::params::{normalize_counts, FitOptions, HmmParams};
use crate::corpus::{decode_states, valid_transition, LabelSpace, Mode, Span};
use crate::error::{Error, Result};

/// Documents per unit of parallel work. Fixed so that the summation order of
/// sufficient statistics does not depend on the number of threads.
const CHUNK: usize = 16;

/// Precomputed log emission densities, indexed `[j][s][k]`.
#[derive(Debug, Clone)]
pub struct EmissionTable {
    n_states: usize,
    n_symbols: usize,
    log: Vec<f64>,
}

fn is_tempered(weights: &[f64]) -> bool {
    weights.iter().any(|&w| w != 1.0)
}

fn log_normalizer(probs: &[f64], weights: &[f64]) -> f64 {
    probs.iter().zip(weights).map(|(p, w)| p.powf(*w)).sum::<f64>().ln()
}

impl EmissionTable {
    pub fn new(params: &HmmParams) -> Self {
        let n_states = params.n_states();
        let n_symbols = params.n_symbols();
        let mut log = Vec::with_capacity(params.n_lfs() * n_states * n_symbols);
        for (em, w) in params.emissions.iter().zip(&params.weights) {
            let tempered = is_tempered(w);
            for row in em {
                if tempered {
                    let log_z = log_normalizer(row, w);
                    log.extend(row.iter().zip(w).map(|(p, wk)| wk * p.ln() - log_z));
                } else {
                    log.extend(row.iter().map(|p| p.ln()));
                }
            }
        }
        EmissionTable {
            n_states,
            n_symbols,
            log,
        }
    }

    #[inline]
    pub fn get(&self, lf: usize, state: usize, symbol: usize) -> f64 {
        self.log[(lf * self.n_states + state) * self.n_symbols + symbol]
    }

    /// Joint log emission score of one observation row in one state.
    #[inline]
    pub fn score(&self, row: &[u32], state: usize) -> f64 {
        row.iter()
            .enumerate()
            .map(|(j, &k)| self.get(j, state, k as usize))
            .sum()
    }
}

/// Log emission score of one observation row (one symbol per function) in
/// latent state `state`, computed directly from the parameters.
pub fn emission_logscore(row: &[usize], state: usize, params: &HmmParams) -> f64 {
    row.iter()
        .enumerate()
        .map(|(j, &k)| {
            let p = &params.emissions[j][state];
            let w = &params.weights[j];
            if is_tempered(w) {
                w[k] * p[k].ln() - log_normalizer(p, w)
            } else {
                p[k].ln()
            }
        })
        .sum()
}

/// Start vector and transitions with BIO structural zeros applied: I-X may
/// only follow B-X or I-X and cannot start a sequence.
pub fn structured_chain(space: &LabelSpace, params: &HmmParams) -> Chain {
    let s_n = space.n_states();
    let mut start = params.start.clone();
    let mut trans: Vec<f64> = params.transitions.iter().flatten().copied().collect();
    if space.mode() == Mode::Sequence {
        for k in 0..s_n {
            let next = space.state(k);
            if !valid_transition(None, next) {
                start[k] = 0.0;
            }
            for l in 0..s_n {
                if !valid_transition(Some(space.state(l)), next) {
                    trans[l * s_n + k] = 0.0;
                }
            }
        }
    }
    Chain::new(start, trans)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Most probable state sequence only.
    #[default]
    Map,
    /// Most probable sequence plus per-token marginals.
    Posterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub states: Vec<usize>,
    pub spans: Vec<Span>,
    pub posteriors: Option<Posteriors>,
}

/// A parameterised model ready for inference.
#[derive(Debug, Clone)]
pub struct HmmModel {
    space: LabelSpace,
    params: HmmParams,
    chain: Chain,
    table: EmissionTable,
}

impl HmmModel {
    pub fn new(space: LabelSpace, params: HmmParams) -> Result<Self> {
        params.validate(&space, params.n_lfs())?;
        let chain = structured_chain(&space, &params);
        let table = EmissionTable::new(&params);
        Ok(HmmModel {
            space,
            params,
            chain,
            table,
        })
    }

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn params(&self) -> &HmmParams {
        &self.params
    }

    pub fn into_params(self) -> HmmParams {
        self.params
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    fn check(&self, obs: &ObservationMatrix) -> Result<()> {
        if obs.n_lfs() != self.params.n_lfs() {
            return Err(Error::InvalidParams(format!(
                "observations have {} columns, model has {} functions",
                obs.n_lfs(),
                self.params.n_lfs()
            )));
        }
        Ok(())
    }

    /// `n x S` log emission scores with unsupported states set to `-inf`.
    pub fn log_emissions(&self, obs: &ObservationMatrix) -> Vec<f64> {
        let s_n = self.space.n_states();
        let mask = obs.support(&self.space);
        let mut out = vec![f64::NEG_INFINITY; obs.n_rows() * s_n];
        for i in 0..obs.n_rows() {
            let row = obs.row(i);
            for s in 0..s_n {
                if mask[i * s_n + s] {
                    out[i * s_n + s] = self.table.score(row, s);
                }
            }
        }
        out
    }

    pub fn forward_backward(&self, obs: &ObservationMatrix) -> Result<Posteriors> {
        self.check(obs)?;
        lattice::forward_backward(&self.chain, &self.log_emissions(obs))
            .ok_or_else(|| Error::InvalidParams("observation sequence has zero probability".into()))
    }

    pub fn viterbi(&self, obs: &ObservationMatrix) -> Result<Vec<usize>> {
        self.check(obs)?;
        lattice::viterbi(&self.chain, &self.log_emissions(obs))
            .map(|(path, _)| path)
            .ok_or_else(|| Error::InvalidParams("observation sequence has zero probability".into()))
    }

    pub fn decode(&self, obs: &ObservationMatrix, mode: DecodeMode) -> Result<Decoded> {
        if self.space.mode() != Mode::Sequence {
            return Err(Error::ModeMismatch { expected: "sequence" });
        }
        let states = self.viterbi(obs)?;
        let (spans, _) = decode_states(&states, &self.space);
        let posteriors = match mode {
            DecodeMode::Map => None,
            DecodeMode::Posterior => Some(self.forward_backward(obs)?),
        };
        Ok(Decoded {
            states,
            spans,
            posteriors,
        })
    }

    /// Class posterior of a document: start probability times the tempered
    /// emission product over supported classes, normalised.
    pub fn classify(&self, obs: &ObservationMatrix) -> Result<Vec<f64>> {
        if self.space.mode() != Mode::Classification {
            return Err(Error::ModeMismatch { expected: "classification" });
        }
        self.check(obs)?;
        if obs.n_rows() != 1 {
            return Err(Error::InvalidParams("classification observations must have one row".into()));
        }
        let scores: Vec<f64> = self
            .log_emissions(obs)
            .iter()
            .zip(&self.params.start)
            .map(|(e, p)| e + p.ln())
            .collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = unnorm.iter().sum();
        Ok(unnorm.into_iter().map(|u| u / z).collect())
    }

    /// Log-likelihood of the corpus plus the smoothing prior term.
    pub fn objective(&self, corpus: &[ObservationMatrix]) -> Result<TraceEntry> {
        let stats = self.e_step(corpus)?;
        Ok(TraceEntry {
            log_likelihood: stats.log_likelihood,
            objective: stats.log_likelihood + log_prior(&self.params, self.params.alpha),
        })
    }

    fn e_step(&self, corpus: &[ObservationMatrix]) -> Result<Stats> {
        let (s_n, l_n, j_n) = (self.space.n_states(), self.space.n_symbols(), self.params.n_lfs());
        let partials: Vec<Stats> = corpus
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = Stats::zeros(s_n, l_n, j_n);
                for obs in chunk {
                    let post = self.forward_backward(obs)?;
                    acc.add_document(obs, &post);
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = Stats::zeros(s_n, l_n, j_n);
        for p in &partials {
            total.merge(p);
        }
        Ok(total)
    }
}

fn log_prior(params: &HmmParams, alpha: f64) -> f64 {
    let sum_logs = params.start.iter().map(|p| p.ln()).sum::<f64>()
        + params.transitions.iter().flatten().map(|p| p.ln()).sum::<f64>()
        + params.emissions.iter().flatten().flatten().map(|p| p.ln()).sum::<f64>();
    alpha * sum_logs
}

/// Expected sufficient statistics of the E-step.
#[derive(Debug, Clone)]
struct Stats {
    n_states: usize,
    n_symbols: usize,
    start: Vec<f64>,
    trans: Vec<f64>,
    emit: Vec<f64>,
    log_likelihood: f64,
}

impl Stats {
    fn zeros(n_states: usize, n_symbols: usize, n_lfs: usize) -> Self {
        Stats {
            n_states,
            n_symbols,
            start: vec![0.0; n_states],
            trans: vec![0.0; n_states * n_states],
            emit: vec![0.0; n_lfs * n_states * n_symbols],
            log_likelihood: 0.0,
        }
    }

    fn add_document(&mut self, obs: &ObservationMatrix, post: &Posteriors) {
        if obs.n_rows() == 0 {
            return;
        }
        let s_n = self.n_states;
        for (a, b) in self.start.iter_mut().zip(post.row(0)) {
            *a += b;
        }
        for (a, b) in self.trans.iter_mut().zip(&post.transitions) {
            *a += b;
        }
        for i in 0..obs.n_rows() {
            let marg = post.row(i);
            for (j, &k) in obs.row(i).iter().enumerate() {
                let base = j * s_n * self.n_symbols + k as usize;
                for (s, &g) in marg.iter().enumerate() {
                    if g > 0.0 {
                        self.emit[base + s * self.n_symbols] += g;
                    }
                }
            }
        }
        self.log_likelihood += post.log_likelihood;
    }

    fn merge(&mut self, other: &Stats) {
        for (a, b) in self.start.iter_mut().zip(&other.start) {
            *a += b;
        }
        for (a, b) in self.trans.iter_mut().zip(&other.trans) {
            *a += b;
        }
        for (a, b) in self.emit.iter_mut().zip(&other.emit) {
            *a += b;
        }
        self.log_likelihood += other.log_likelihood;
    }
}

/// Expected complete-data objective of one tempered emission row.
fn tempered_q(counts: &[f64], weights: &[f64], probs: &[f64], alpha: f64) -> f64 {
    let total: f64 = counts.iter().sum();
    let fit: f64 = counts
        .iter()
        .zip(weights)
        .zip(probs)
        .map(|((c, w), p)| c * w * p.ln())
        .sum();
    let prior: f64 = probs.iter().map(|p| p.ln()).sum();
    fit - total * log_normalizer(probs, weights) + alpha * prior
}

/// M-step for one tempered emission row. The smoothed relative frequencies are
/// accepted when they do not lower the row objective; otherwise the update is
/// damped towards the current row until it does, keeping EM monotone.
fn update_tempered_row(counts: &[f64], weights: &[f64], current: &[f64], alpha: f64) -> Vec<f64> {
    let proposal = normalize_counts(counts, alpha);
    let base = tempered_q(counts, weights, current, alpha);
    let mut step = 1.0;
    for _ in 0..40 {
        let candidate: Vec<f64> = current
            .iter()
            .zip(&proposal)
            .map(|(c, p)| c + step * (p - c))
            .collect();
        if tempered_q(counts, weights, &candidate, alpha) >= base {
            return candidate;
        }
        step *= 0.5;
    }
    current.to_vec()
}

fn m_step(stats: &Stats, params: &HmmParams, alpha: f64) -> HmmParams {
    let (s_n, l_n) = (stats.n_states, stats.n_symbols);
    let emissions = params
        .emissions
        .iter()
        .zip(&params.weights)
        .enumerate()
        .map(|(j, (em, w))| {
            let tempered = is_tempered(w);
            (0..s_n)
                .map(|s| {
                    let counts = &stats.emit[(j * s_n + s) * l_n..(j * s_n + s + 1) * l_n];
                    if tempered {
                        update_tempered_row(counts, w, &em[s], alpha)
                    } else {
                        normalize_counts(counts, alpha)
                    }
                })
                .collect()
        })
        .collect();
    HmmParams {
        start: normalize_counts(&stats.start, alpha),
        transitions: stats.trans.chunks(s_n).map(|r| normalize_counts(r, alpha)).collect(),
        emissions,
        weights: params.weights.clone(),
        gamma: params.gamma,
        alpha,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub log_likelihood: f64,
    /// Log-likelihood plus the smoothing prior; non-decreasing under EM.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: HmmParams,
    /// One entry per E-step, evaluated at the parameters entering it.
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
}

/// Baum-Welch. Weights stay fixed; each iteration runs an E-step at the current
/// parameters, stops if the relative objective change fell below `tol`, and
/// otherwise re-estimates start, transition and emission parameters.
pub fn fit(corpus: &[ObservationMatrix], init: HmmParams, space: &LabelSpace, options: &FitOptions) -> Result<FitReport> {
    options.validate()?;
    if corpus.iter().all(|o| o.n_rows() == 0) {
        return Err(Error::EmptyCorpus);
    }
    let alpha = options.alpha;
    let mut params = init;
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut converged = false;
    for _ in 0..options.max_iter {
        let model = HmmModel::new(space.clone(), params)?;
        let stats = model.e_step(corpus)?;
        params = model.into_params();
        let objective = stats.log_likelihood + log_prior(&params, alpha);
        if let Some(prev) = trace.last() {
            let change = (objective - prev.objective).abs() / prev.objective.abs().max(f64::MIN_POSITIVE);
            if change < options.tol {
                trace.push(TraceEntry {
                    log_likelihood: stats.log_likelihood,
                    objective,
                });
                converged = true;
                break;
            }
        }
        trace.push(TraceEntry {
            log_likelihood: stats.log_likelihood,
            objective,
        });
        params = m_step(&stats, &params, alpha);
    }
    Ok(FitReport {
        params,
        trace,
        converged,
    })
}
