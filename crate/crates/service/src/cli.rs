//! Command-line interface.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use casebrief_core::classifier::{train, Backend, ModelArtifact, Provenance, TrainConfig};
use casebrief_core::corpus::{
    ingest_all, read_records, write_processed, Corpus, DatasetSplit, HeadingPatterns, Ingestor, SplitName,
    SplitRatios,
};
use casebrief_core::evalharness::{
    compare_models, evaluate, render_classification, render_comparison, render_warnings, warning_report, EvalInputs,
    EvalRunRecord,
};
use casebrief_core::synth::{generate, SynthConfig};
use casebrief_core::warnings::WarningThreshold;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::api::{router, AppState};
use crate::config::{Config, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "casebrief", version, about = "Case-brief tutoring: corpus tools, model training and the tutoring service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment raw briefs into labeled sentences and assign splits.
    Ingest(IngestArgs),
    /// Train a sentence classifier on the train split of a corpus.
    Train(TrainArgs),
    /// Write classification and warning reports for one split.
    Evaluate(EvaluateArgs),
    /// Warning confusion tables over several thresholds.
    WarnSweep(WarnSweepArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write a synthetic raw corpus with known labels.
    GenerateSynthetic(SynthArgs),
    /// Compare two evaluation runs over the same test set.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for SplitName {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitName::Train,
            SplitArg::Validation => SplitName::Validation,
            SplitArg::Test => SplitName::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitOpts {
    /// Seed of the document-level split.
    #[arg(long = "split-seed")]
    pub split_seed: Option<u64>,
    /// Train, validation and test fractions.
    #[arg(long)]
    pub ratios: Option<SplitRatios>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in", alias = "input")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Heading pattern file; the built-in patterns are used when omitted.
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub ratios: SplitRatios,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub split: SplitOpts,
    #[arg(long, default_value = "linear")]
    pub backend: Backend,
    #[arg(long, default_value_t = 4)]
    pub epochs: usize,
    /// Training seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub taus: Vec<f64>,
    #[command(flatten)]
    pub split_opts: SplitOpts,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WarnSweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub taus: Vec<f64>,
    #[command(flatten)]
    pub split_opts: SplitOpts,
    /// Report file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    /// Project store directory.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Model directory to activate at startup.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Default warning threshold for new sessions.
    #[arg(long)]
    pub tau: Option<f64>,
    /// TOML config file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 600)]
    pub docs: usize,
    /// Probability that a sentence carries another label's vocabulary.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First `eval_run.json`.
    #[arg(long)]
    pub a: PathBuf,
    /// Second `eval_run.json`.
    #[arg(long)]
    pub b: PathBuf,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::WarnSweep(a) => warn_sweep(a),
        Command::Serve(a) => serve(a),
        Command::GenerateSynthetic(a) => synthesize(a),
        Command::Compare(a) => compare(a),
    }
}

fn ingest(args: IngestArgs) -> anyhow::Result<()> {
    let mut ingestor = Ingestor::default();
    if let Some(p) = &args.patterns {
        ingestor = Ingestor::with_patterns(HeadingPatterns::from_file(p)?);
    }
    let report = ingest_all(read_records(&args.input)?, &ingestor);
    for (doc_id, e) in &report.rejected {
        eprintln!("warning: skipped {doc_id}: {e}");
    }
    if report.briefs.is_empty() {
        bail!("no usable briefs in {}", args.input.display());
    }
    let mut corpus = Corpus::new(report.briefs)?;
    let split = corpus.split(args.seed, args.ratios)?;
    corpus.assign_splits(&split);
    let file = fs::File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    write_processed(&mut out, &corpus.briefs)?;
    out.flush()?;
    let (tr, va, te) = split.sizes();
    println!(
        "ingested {} briefs ({} sentences, {} rejected); split {tr}/{va}/{te}",
        corpus.briefs.len(),
        corpus.sentences().count(),
        report.rejected.len()
    );
    Ok(())
}

fn load_corpus(path: &Path) -> anyhow::Result<Corpus> {
    Corpus::load(path, &Ingestor::default()).with_context(|| format!("cannot load corpus {}", path.display()))
}

/// Split settings: explicit flags, then the model's provenance, then defaults.
fn resolve_split(opts: &SplitOpts, model: Option<&ModelArtifact>) -> (u64, SplitRatios) {
    let provenance = model.and_then(|m| m.manifest().provenance.as_ref());
    let seed = opts.split_seed.or(provenance.map(|p| p.split_seed)).unwrap_or(0);
    let ratios = opts.ratios.or(provenance.map(|p| p.ratios)).unwrap_or_default();
    (seed, ratios)
}

fn train_cmd(args: TrainArgs) -> anyhow::Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let (split_seed, ratios) = resolve_split(&args.split, None);
    let split = corpus.split(split_seed, ratios)?;
    let train_set = corpus.sentences_in(&split, SplitName::Train);
    let validation = corpus.sentences_in(&split, SplitName::Validation);
    let config = TrainConfig { epochs: args.epochs, seed: args.seed, ..TrainConfig::new(args.backend) };
    let model = train(&train_set, &validation, &config)?.with_provenance(Provenance {
        corpus_fingerprint: corpus.fingerprint(),
        split_seed,
        ratios,
    });
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    model.save(&args.out)?;
    let m = model.manifest();
    match m.best_epoch {
        Some(best) => println!(
            "trained {} model {} on {} sentences; best epoch {best} (weighted F1 {:.4} on {})",
            m.backend,
            model.id(),
            m.train_size,
            m.epoch_scores[best - 1],
            m.selection_set.as_deref().unwrap_or("validation")
        ),
        None => println!("trained {} model {} on {} sentences", m.backend, model.id(), m.train_size),
    }
    Ok(())
}

struct Prepared {
    model: ModelArtifact,
    corpus: Corpus,
    split: DatasetSplit,
    split_seed: u64,
    ratios: SplitRatios,
}

fn prepare(model: &Path, corpus: &Path, opts: &SplitOpts) -> anyhow::Result<Prepared> {
    let model = ModelArtifact::load(model).with_context(|| format!("cannot load model {}", model.display()))?;
    let corpus = load_corpus(corpus)?;
    let (split_seed, ratios) = resolve_split(opts, Some(&model));
    let split = corpus.split(split_seed, ratios)?;
    Ok(Prepared { model, corpus, split, split_seed, ratios })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut json = serde_json::to_vec_pretty(value)?;
    json.push(b'\n');
    fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn evaluate_cmd(args: EvaluateArgs) -> anyhow::Result<()> {
    let p = prepare(&args.model, &args.corpus, &args.split_opts)?;
    let train_set = p.corpus.sentences_in(&p.split, SplitName::Train);
    let validation = p.corpus.sentences_in(&p.split, SplitName::Validation);
    let target = p.corpus.sentences_in(&p.split, args.split.into());
    let inputs = EvalInputs {
        corpus_fingerprint: p.corpus.fingerprint(),
        split_seed: p.split_seed,
        ratios: p.ratios,
        train: &train_set,
        validation: &validation,
        test: &target,
        taus: &args.taus,
    };
    let record = evaluate(&p.model, &inputs)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    write_reports(&args.out, &record)?;
    print!("{}", render_classification(&record.classification));
    println!();
    print!("{}", render_warnings(&record.warnings));
    Ok(())
}

/// Every file except `eval_run.json` is a pure function of the inputs.
pub fn write_reports(dir: &Path, record: &EvalRunRecord) -> anyhow::Result<()> {
    write_json(&dir.join("classification_report.json"), &record.classification)?;
    write_text(&dir.join("classification_report.txt"), &render_classification(&record.classification))?;
    write_json(&dir.join("warning_report.json"), &record.warnings)?;
    write_text(&dir.join("warning_report.txt"), &render_warnings(&record.warnings))?;
    write_json(&dir.join("label_distribution.json"), &record.label_distribution)?;
    write_json(&dir.join("eval_run.json"), record)
}

fn warn_sweep(args: WarnSweepArgs) -> anyhow::Result<()> {
    let p = prepare(&args.model, &args.corpus, &args.split_opts)?;
    let target = p.corpus.sentences_in(&p.split, args.split.into());
    let report = warning_report(&p.model, &target, &args.taus)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    write_json(&args.out, &report)?;
    print!("{}", render_warnings(&report));
    Ok(())
}

fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let Some(store) = args.store.or(file.store_path) else {
        bail!("a project store is required (--store or store_path in --config)");
    };
    let mut config = Config::new(store);
    config.model_path = args.model.or(file.model_path);
    config.default_tau = match args.tau {
        Some(t) => WarningThreshold::new(t)?,
        None => file.default_tau.unwrap_or(WarningThreshold::DEFAULT),
    };
    if let Some(g) = file.gates {
        config.gates = g;
    }
    config.port = args.port.or(file.port).unwrap_or(config.port);
    config.reveal_explanations = file.reveal_explanations.unwrap_or(false);

    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "casebrief=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let state = AppState::new(&config).map_err(|e| anyhow::anyhow!("{}", e.message))?;
    tracing::info!(store = %config.store_path.display(), model = %state.active_model, "store opened");
    let app = router(Arc::new(state));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, config.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("cannot bind {addr}"))?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn synthesize(args: SynthArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&args.noise) {
        bail!("noise must be in [0, 1], got {}", args.noise);
    }
    let config = SynthConfig { docs: args.docs, noise: args.noise, seed: args.seed, ..SynthConfig::default() };
    let briefs = generate(&config);
    let file = fs::File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    for b in &briefs {
        serde_json::to_writer(&mut out, &b.raw)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    println!("wrote {} synthetic briefs to {}", briefs.len(), args.out.display());
    Ok(())
}

fn compare(args: CompareArgs) -> anyhow::Result<()> {
    let read = |p: &Path| -> anyhow::Result<EvalRunRecord> {
        let bytes = fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("{} is not an evaluation run", p.display()))
    };
    let comparison = compare_models(&read(&args.a)?, &read(&args.b)?)?;
    print!("{}", render_comparison(&comparison));
    Ok(())
}
