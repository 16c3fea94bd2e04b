use weaksup::aggregation::{build_corpus_observations, fit, init_from_majority, FitOptions};
use weaksup::synth::{emission_accuracy, generate, SynthSpec};

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    for (r, i) in order.into_iter().enumerate() {
        out[i] = r as f64;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn learned_accuracies_rank_like_the_generating_ones() {
    let corpus = generate(&SynthSpec::standard(500, 20, 11)).unwrap();
    let names = corpus.lf_names();
    let obs = build_corpus_observations(&corpus.docs, &names, &corpus.space).unwrap();
    let options = FitOptions::default();
    let init = init_from_majority(&obs, &corpus.space, &vec![vec![]; names.len()], &options).unwrap();
    let learned = fit(&obs, init, &corpus.space, &options).unwrap().params;
    let truth: Vec<f64> = (0..names.len()).map(|j| emission_accuracy(&corpus.params, &corpus.space, j)).collect();
    let fitted: Vec<f64> = (0..names.len()).map(|j| emission_accuracy(&learned, &corpus.space, j)).collect();
    let rho = spearman(&truth, &fitted);
    assert!(rho > 0.0, "rank correlation {rho}: truth {truth:?}, fitted {fitted:?}");
}

#[test]
fn fitted_rows_are_distributions() {
    let corpus = generate(&SynthSpec::standard(60, 12, 12)).unwrap();
    let names = corpus.lf_names();
    let obs = build_corpus_observations(&corpus.docs, &names, &corpus.space).unwrap();
    let hoods: Vec<Vec<usize>> = (0..names.len()).map(|j| vec![j ^ 1]).collect();
    let options = FitOptions { gamma: 0.5, ..FitOptions::default() };
    let init = init_from_majority(&obs, &corpus.space, &hoods, &options).unwrap();
    let p = fit(&obs, init, &corpus.space, &options).unwrap().params;
    let rows = std::iter::once(&p.start).chain(&p.transitions).chain(p.emissions.iter().flatten());
    for row in rows {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(row.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}
