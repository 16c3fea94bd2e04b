//! Reference implementations used as test oracles. They work from state and
//! symbol names and plain arithmetic rather than the library's indices and
//! precomputed tables.

#![allow(dead_code)]

use std::collections::HashSet;

use weaksup::aggregation::{HmmParams, ObservationMatrix};
use weaksup::corpus::{LabelSpace, Mode};

/// Splits `B-X` / `I-X` into prefix and label; `O` and class names have no prefix.
fn split(name: &str) -> (Option<char>, &str) {
    match name.split_once('-') {
        Some((p, rest)) if p == "B" || p == "I" => (p.chars().next(), rest),
        _ => (None, name),
    }
}

fn covers(space: &LabelSpace, observed_label: &str, state_label: &str) -> bool {
    observed_label == state_label
        || space.decl().underspecified.get(observed_label).is_some_and(|m| m.iter().any(|x| x == state_label))
}

pub fn compatible(space: &LabelSpace, symbol: &str, state: &str) -> bool {
    if symbol == "VOID" {
        return true;
    }
    if state == "O" {
        return false;
    }
    let (sp, sl) = split(symbol);
    let (tp, tl) = split(state);
    sp == tp && covers(space, sl, tl)
}

/// Whether `next` may follow `prev` (None = sequence start).
pub fn allowed(prev: Option<&str>, next: &str) -> bool {
    match split(next) {
        (Some('I'), label) => prev.is_some_and(|p| matches!(split(p), (Some(_), l) if l == label)),
        _ => true,
    }
}

/// Support of state `state` at a position with observed symbols `row`.
pub fn supported(space: &LabelSpace, row: &[&str], state: &str) -> bool {
    match space.mode() {
        Mode::Sequence => state == "O" || row.iter().any(|s| *s != "VOID" && compatible(space, s, state)),
        Mode::Classification => row.iter().all(|s| *s == "VOID") || row.iter().any(|s| *s != "VOID" && compatible(space, s, state)),
    }
}

/// Tempered emission density of one function, straight from the definition.
pub fn emission(params: &HmmParams, lf: usize, state: usize, symbol: usize) -> f64 {
    let p = &params.emissions[lf][state];
    let w = &params.weights[lf];
    let z: f64 = p.iter().zip(w).map(|(pk, wk)| pk.powf(*wk)).sum();
    p[symbol].powf(w[symbol]) / z
}

pub struct Enumeration {
    pub marginals: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub best_path: Vec<usize>,
    pub best_prob: f64,
}

/// Exhaustive enumeration of all state sequences.
pub fn enumerate(space: &LabelSpace, params: &HmmParams, obs: &ObservationMatrix) -> Enumeration {
    let s_n = space.n_states();
    let n = obs.n_rows();
    let states = space.state_names();
    let symbols = space.symbol_names();
    let rows: Vec<Vec<&str>> = (0..n).map(|i| obs.row(i).iter().map(|&k| symbols[k as usize].as_str()).collect()).collect();
    let mut marginals = vec![vec![0.0; s_n]; n];
    let mut total = 0.0;
    let mut best_path = vec![];
    let mut best_prob = -1.0;
    let mut path = vec![0usize; n];
    let combos = s_n.pow(n as u32);
    for code in 0..combos {
        let mut c = code;
        for slot in path.iter_mut().rev() {
            *slot = c % s_n;
            c /= s_n;
        }
        let mut prob = 1.0;
        for (t, &s) in path.iter().enumerate() {
            let prev = if t == 0 { None } else { Some(states[path[t - 1]].as_str()) };
            if space.mode() == Mode::Sequence && !allowed(prev, &states[s]) {
                prob = 0.0;
                break;
            }
            if !supported(space, &rows[t], &states[s]) {
                prob = 0.0;
                break;
            }
            prob *= if t == 0 { params.start[s] } else { params.transitions[path[t - 1]][s] };
            for j in 0..obs.n_lfs() {
                prob *= emission(params, j, s, obs.get(t, j));
            }
        }
        total += prob;
        for (t, &s) in path.iter().enumerate() {
            marginals[t][s] += prob;
        }
        if prob > best_prob {
            best_prob = prob;
            best_path = path.clone();
        }
    }
    for row in &mut marginals {
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    Enumeration {
        marginals,
        log_likelihood: total.ln(),
        best_path,
        best_prob,
    }
}

/// Probability of one particular path, for comparing near-tied optima.
pub fn path_prob(space: &LabelSpace, params: &HmmParams, obs: &ObservationMatrix, path: &[usize]) -> f64 {
    let states = space.state_names();
    let symbols = space.symbol_names();
    let mut prob = 1.0;
    for (t, &s) in path.iter().enumerate() {
        let row: Vec<&str> = obs.row(t).iter().map(|&k| symbols[k as usize].as_str()).collect();
        let prev = if t == 0 { None } else { Some(states[path[t - 1]].as_str()) };
        if (space.mode() == Mode::Sequence && !allowed(prev, &states[s])) || !supported(space, &row, &states[s]) {
            return 0.0;
        }
        prob *= if t == 0 { params.start[s] } else { params.transitions[path[t - 1]][s] };
        for j in 0..obs.n_lfs() {
            prob *= emission(params, j, s, obs.get(t, j));
        }
    }
    prob
}

/// Leftmost-longest dictionary matching by brute force over an entry list.
pub fn naive_gazetteer(entries: &[Vec<String>], tokens: &[String]) -> Vec<(usize, usize)> {
    let max_len = entries.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut found = None;
        for len in (1..=max_len.min(tokens.len() - i)).rev() {
            if entries.iter().any(|e| e.as_slice() == &tokens[i..i + len]) {
                found = Some(len);
                break;
            }
        }
        match found {
            Some(len) => {
                out.push((i, i + len));
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

/// Recall of function `j` against function `l` on symbol `k`, by counting.
pub fn recall(obs: &[ObservationMatrix], j: usize, l: usize, k: usize) -> f64 {
    let (mut both, mut ref_count) = (0u64, 0u64);
    for o in obs {
        for i in 0..o.n_rows() {
            if o.get(i, l) == k {
                ref_count += 1;
                if o.get(i, j) == k {
                    both += 1;
                }
            }
        }
    }
    if ref_count == 0 {
        0.0
    } else {
        both as f64 / ref_count as f64
    }
}

/// Deduplicates entries while keeping first-seen order.
pub fn unique(entries: Vec<Vec<String>>) -> Vec<Vec<String>> {
    let mut seen = HashSet::new();
    entries.into_iter().filter(|e| seen.insert(e.clone())).collect()
}
