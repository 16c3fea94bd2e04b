use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use weaksup::aggregation::{
    build_corpus_observations, fit, init_from_majority, majority_vote, DecodeMode, FitOptions, HmmModel, ModelFile,
};
use weaksup::corpus::{decode_states, read_corpus, write_corpus, Document, LabelSpace, Mode, Span};
use weaksup::eval::{gold_states, lf_diagnostics, score_classification, score_sequence, UnderspecifiedPolicy};
use weaksup::lf::LfConfig;
use weaksup::synth::{generate, write_project, SynthSpec};

/// Marks failures caused by configuration rather than by the data.
#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// 2 for configuration errors, 3 for data errors.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<weaksup::Error>() {
            return if e.is_config_error() { 2 } else { 3 };
        }
    }
    3
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Sequence,
    Classification,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sequence => Mode::Sequence,
            ModeArg::Classification => Mode::Classification,
        }
    }
}

/// Labelling functions and HMM aggregation for weak supervision.
#[derive(Debug, Parser)]
#[command(name = "weaksup", version)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Override the label-space mode of the configuration.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Hyper {
    /// Tempering strength for correlated functions.
    #[arg(long)]
    gamma: Option<f64>,
    /// Additive smoothing for the M-step.
    #[arg(long)]
    alpha: Option<f64>,
    /// Relative objective change that stops EM.
    #[arg(long)]
    tol: Option<f64>,
    /// Maximum EM iterations.
    #[arg(long)]
    max_iter: Option<usize>,
}

impl Hyper {
    fn apply(&self, base: FitOptions) -> FitOptions {
        FitOptions {
            gamma: self.gamma.unwrap_or(base.gamma),
            alpha: self.alpha.unwrap_or(base.alpha),
            tol: self.tol.unwrap_or(base.tol),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the labelling functions and write one layer per function.
    Apply {
        /// Input corpus (JSON lines).
        #[arg(long)]
        corpus: PathBuf,
        /// Labelling-function configuration (TOML).
        #[arg(long)]
        lf_config: PathBuf,
        /// Output corpus (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Add a majority-vote layer.
    Vote {
        /// Input corpus (JSON lines).
        #[arg(long)]
        corpus: PathBuf,
        /// Labelling-function configuration (TOML).
        #[arg(long)]
        lf_config: PathBuf,
        /// Output corpus (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Name of the output layer.
        #[arg(long, default_value = "mv")]
        layer: String,
    },
    /// Estimate the aggregation model and write it with its objective trace.
    Fit {
        /// Input corpus (JSON lines).
        #[arg(long)]
        corpus: PathBuf,
        /// Labelling-function configuration (TOML).
        #[arg(long)]
        lf_config: PathBuf,
        /// Model file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Trace file; defaults to the model path with a `.trace.tsv` suffix.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Add the aggregated layer predicted by a fitted model.
    Decode {
        /// Input corpus (JSON lines).
        #[arg(long)]
        corpus: PathBuf,
        /// Model file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Output corpus (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Name of the output layer.
        #[arg(long, default_value = "hmm")]
        layer: String,
        /// Also write per-position state marginals (JSON lines).
        #[arg(long)]
        posteriors: Option<PathBuf>,
    },
    /// Score a layer against gold; writes report.json, report.tsv and, when
    /// all function layers are present, diagnostics.json.
    Eval {
        /// Input corpus (JSON lines).
        #[arg(long)]
        corpus: PathBuf,
        /// Labelling-function configuration (TOML).
        #[arg(long)]
        lf_config: PathBuf,
        /// Layer to score.
        #[arg(long)]
        layer: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Score underspecified predictions as wrong unless identical to gold.
        #[arg(long)]
        strict: bool,
    },
    /// Sample a synthetic project (corpus, predictions, config, generating model).
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of documents.
        #[arg(long, default_value_t = 500)]
        docs: usize,
        /// Tokens per document.
        #[arg(long, default_value_t = 20)]
        doc_len: usize,
        /// Number of labelling functions.
        #[arg(long, default_value_t = 6)]
        lfs: usize,
        #[command(flatten)]
        hyper: Hyper,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| ConfigError(format!("cannot start worker pool: {e}")))?;
    let mode = cli.mode.map(Mode::from);
    pool.install(|| dispatch(cli.command, mode))
}

fn dispatch(command: Command, mode: Option<Mode>) -> Result<()> {
    match command {
        Command::Apply { corpus, lf_config, out } => cmd_apply(&corpus, &lf_config, &out, mode),
        Command::Vote {
            corpus,
            lf_config,
            out,
            layer,
        } => cmd_vote(&corpus, &lf_config, &out, &layer, mode),
        Command::Fit {
            corpus,
            lf_config,
            model,
            trace,
            hyper,
        } => {
            let trace = trace.unwrap_or_else(|| with_suffix(&model, ".trace.tsv"));
            cmd_fit(&corpus, &lf_config, &model, &trace, &hyper, mode)
        }
        Command::Decode {
            corpus,
            model,
            out,
            layer,
            posteriors,
        } => cmd_decode(&corpus, &model, &out, &layer, posteriors.as_deref()),
        Command::Eval {
            corpus,
            lf_config,
            layer,
            out,
            strict,
        } => cmd_eval(&corpus, &lf_config, &layer, &out, strict, mode),
        Command::Synth {
            out,
            seed,
            docs,
            doc_len,
            lfs,
            hyper,
        } => cmd_synth(&out, seed, docs, doc_len, lfs, &hyper, mode),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

struct Loaded {
    config: LfConfig,
    base: PathBuf,
    space: LabelSpace,
}

fn load_config(path: &Path, mode: Option<Mode>) -> Result<Loaded> {
    let context = || ConfigError(format!("loading configuration {}", path.display()));
    let (mut config, base) = LfConfig::load(path).with_context(context)?;
    if let Some(m) = mode {
        config.labels.mode = m;
    }
    let space = config.label_space().with_context(context)?;
    Ok(Loaded { config, base, space })
}

fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    read_corpus(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn save_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    write_corpus(path, docs).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// A document-wide span for a predicted class; nothing for empty documents.
fn class_layer(doc: &Document, class: &str) -> Vec<Span> {
    if doc.tokens.is_empty() {
        vec![]
    } else {
        vec![Span::new(0, doc.tokens.len(), class)]
    }
}

fn cmd_apply(corpus: &Path, lf_config: &Path, out: &Path, mode: Option<Mode>) -> Result<()> {
    let loaded = load_config(lf_config, mode)?;
    let pipeline = loaded
        .config
        .build(&loaded.base, &loaded.space)
        .map_err(|e| anyhow::Error::new(e).context(ConfigError(format!("building functions from {}", lf_config.display()))))?;
    let mut docs = load_corpus(corpus)?;
    pipeline.apply(&mut docs)?;
    save_corpus(out, &docs)
}

fn cmd_vote(corpus: &Path, lf_config: &Path, out: &Path, layer: &str, mode: Option<Mode>) -> Result<()> {
    let loaded = load_config(lf_config, mode)?;
    let space = &loaded.space;
    let mut docs = load_corpus(corpus)?;
    let obs = build_corpus_observations(&docs, &loaded.config.names(), space)?;
    docs.par_iter_mut().zip(&obs).for_each(|(doc, o)| {
        let voted = majority_vote(o, space);
        let spans = match space.mode() {
            Mode::Sequence => decode_states(&voted, space).0,
            Mode::Classification if o.row(0).iter().all(|&k| k == 0) => vec![],
            Mode::Classification => class_layer(doc, &space.state_names()[voted[0]]),
        };
        doc.set_layer(layer, spans);
    });
    save_corpus(out, &docs)
}

fn cmd_fit(corpus: &Path, lf_config: &Path, model_path: &Path, trace_path: &Path, hyper: &Hyper, mode: Option<Mode>) -> Result<()> {
    let loaded = load_config(lf_config, mode)?;
    let options = hyper.apply(loaded.config.model);
    options
        .validate()
        .map_err(|e| anyhow::Error::new(e).context(ConfigError("invalid hyperparameters".into())))?;
    let pipeline = loaded
        .config
        .build(&loaded.base, &loaded.space)
        .map_err(|e| anyhow::Error::new(e).context(ConfigError(format!("building functions from {}", lf_config.display()))))?;
    let docs = load_corpus(corpus)?;
    let names = loaded.config.names();
    let obs = build_corpus_observations(&docs, &names, &loaded.space)?;
    let neighborhoods = pipeline.neighborhoods();
    let init = init_from_majority(&obs, &loaded.space, &neighborhoods, &options)?;
    let report = fit(&obs, init, &loaded.space, &options)?;
    let mut trace = String::from("iteration\tlog_likelihood\tobjective\n");
    for (i, t) in report.trace.iter().enumerate() {
        trace.push_str(&format!("{i}\t{}\t{}\n", t.log_likelihood, t.objective));
    }
    let model = ModelFile::new(&loaded.space, &names, &neighborhoods, options, report.params);
    write_text(model_path, &model.to_json())?;
    write_text(trace_path, &trace)?;
    eprintln!(
        "fitted {} functions on {} documents: {} iterations{}",
        names.len(),
        docs.len(),
        report.trace.len(),
        if report.converged { ", converged" } else { "" }
    );
    Ok(())
}

#[derive(Serialize)]
struct PosteriorRecord<'a> {
    doc_id: &'a str,
    states: &'a [String],
    marginals: Vec<&'a [f64]>,
}

fn cmd_decode(corpus: &Path, model_path: &Path, out: &Path, layer: &str, posteriors: Option<&Path>) -> Result<()> {
    let context = || ConfigError(format!("loading model {}", model_path.display()));
    let file = ModelFile::load(model_path).with_context(context)?;
    let space = file.label_space().with_context(context)?;
    let model = HmmModel::new(space.clone(), file.params.clone()).with_context(context)?;
    let mut docs = load_corpus(corpus)?;
    let obs = build_corpus_observations(&docs, &file.lf_names(), &space)?;
    let want_post = posteriors.is_some();
    let results: Vec<(Vec<Span>, Option<Vec<f64>>)> = docs
        .par_iter()
        .zip(&obs)
        .map(|(doc, o)| -> weaksup::Result<_> {
            match space.mode() {
                Mode::Sequence => {
                    let mode = if want_post { DecodeMode::Posterior } else { DecodeMode::Map };
                    let d = model.decode(o, mode)?;
                    Ok((d.spans, d.posteriors.map(|p| p.marginals)))
                }
                Mode::Classification => {
                    let post = model.classify(o)?;
                    let best = (0..post.len()).fold(0, |b, c| if post[c] > post[b] { c } else { b });
                    Ok((class_layer(doc, &space.state_names()[best]), Some(post)))
                }
            }
        })
        .collect::<weaksup::Result<_>>()?;
    let s_n = space.n_states();
    let mut post_out = String::new();
    for (doc, (spans, marg)) in docs.iter_mut().zip(results) {
        if let (true, Some(m)) = (want_post, &marg) {
            let record = PosteriorRecord {
                doc_id: &doc.doc_id,
                states: space.state_names(),
                marginals: m.chunks(s_n).collect(),
            };
            post_out.push_str(&serde_json::to_string(&record)?);
            post_out.push('\n');
        }
        doc.set_layer(layer, spans);
    }
    save_corpus(out, &docs)?;
    if let Some(p) = posteriors {
        write_text(p, &post_out)?;
    }
    Ok(())
}

fn cmd_eval(corpus: &Path, lf_config: &Path, layer: &str, out: &Path, strict: bool, mode: Option<Mode>) -> Result<()> {
    let loaded = load_config(lf_config, mode)?;
    let space = &loaded.space;
    let policy = if strict { UnderspecifiedPolicy::Strict } else { UnderspecifiedPolicy::Lenient };
    let docs = load_corpus(corpus)?;
    let gold_docs: Vec<&Document> = docs.iter().filter(|d| d.gold.is_some()).collect();
    let report = match space.mode() {
        Mode::Sequence => {
            let mut pred = Vec::with_capacity(gold_docs.len());
            let mut gold = Vec::with_capacity(gold_docs.len());
            for d in &gold_docs {
                pred.push(d.require_layer(layer)?.to_vec());
                gold.push(d.gold_spans().map(<[Span]>::to_vec).unwrap_or_default());
            }
            score_sequence(&pred, &gold, space, policy)?
        }
        Mode::Classification => {
            let mut pred = Vec::with_capacity(gold_docs.len());
            let mut gold = Vec::with_capacity(gold_docs.len());
            for d in &gold_docs {
                pred.push(d.require_layer(layer)?.first().map(|s| s.label.clone()));
                gold.push(d.gold_class().map(str::to_string).unwrap_or_default());
            }
            score_classification(&pred, &gold, space, policy)?
        }
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join("report.json"), &report.to_json())?;
    write_text(&out.join("report.tsv"), &report.to_tsv())?;

    let names = loaded.config.names();
    let all_layers = gold_docs.iter().all(|d| names.iter().all(|n| d.layer(n).is_some()));
    if all_layers && !names.is_empty() {
        let owned: Vec<Document> = gold_docs.iter().map(|d| (*d).clone()).collect();
        let obs = build_corpus_observations(&owned, &names, space)?;
        let gold = owned.iter().map(|d| gold_states(d, space)).collect::<weaksup::Result<Vec<_>>>()?;
        let diag = lf_diagnostics(&obs, &names, space, Some(&gold))?;
        let mut json = serde_json::to_string_pretty(&diag)?;
        json.push('\n');
        write_text(&out.join("diagnostics.json"), &json)?;
    }
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{}", report.to_tsv())?;
    Ok(())
}

fn cmd_synth(out: &Path, seed: u64, n_docs: usize, doc_len: usize, n_lfs: usize, hyper: &Hyper, mode: Option<Mode>) -> Result<()> {
    if n_lfs == 0 {
        bail!(ConfigError("--lfs must be positive".into()));
    }
    let mut spec = match mode.unwrap_or_default() {
        Mode::Sequence => SynthSpec::with_n_lfs(n_docs, doc_len, n_lfs, seed),
        Mode::Classification => {
            let mut s = SynthSpec::classification(n_docs, doc_len, seed);
            let more = SynthSpec::with_n_lfs(n_docs, doc_len, n_lfs, seed).lfs;
            let under = s.lfs[1].underspecified.clone();
            s.lfs = more;
            for p in &mut s.lfs {
                if p.underspecified.is_some() {
                    p.underspecified = under.clone();
                }
            }
            s
        }
    };
    spec.seed = seed;
    let options = hyper.apply(FitOptions::default());
    options
        .validate()
        .map_err(|e| anyhow::Error::new(e).context(ConfigError("invalid hyperparameters".into())))?;
    let corpus = generate(&spec).map_err(|e| anyhow::Error::new(e).context(ConfigError("invalid synthetic settings".into())))?;
    write_project(out, &corpus, options).with_context(|| format!("writing synthetic project to {}", out.display()))?;
    Ok(())
}
