//! Command-line entry points: data generation, training, evaluation, and
//! the top-N sweep.
//!
//! Every command is deterministic given its flags and input files. Flags
//! mirror config keys one-to-one and override file values; the effective
//! config is echoed into the run manifest. `CORAG_SEED` overrides the seed
//! from any source.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::core::io::{read_corpus, read_dataset, write_corpus, write_dataset};
use crate::error::{Error, Result};
use crate::generator::AdvantageNorm;
use crate::synthenv::{generate_task, SynthSpec};
use crate::trainer::{
    evaluate, load_checkpoint, train_from, RunSink, TrainState, TrainerConfig, TrainingMode,
};

pub const SEED_ENV_VAR: &str = "CORAG_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "corag",
    about = "Cooperative reranker/generator training on synthetic retrieval tasks",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and dataset with known gold documents.
    GenData(GenDataArgs),
    /// Train the reranker and generator against the shared reward.
    Train(Box<TrainArgs>),
    /// Evaluate a checkpoint with greedy decoding.
    Eval(EvalArgs),
    /// Evaluate a checkpoint at several k values and write a CSV.
    SweepTopn(SweepTopnArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Number of queries.
    #[arg(long, default_value_t = 200)]
    pub queries: usize,
    /// Candidate documents per query.
    #[arg(long, default_value_t = 10)]
    pub candidates: usize,
    /// Gold documents per query.
    #[arg(long, default_value_t = 1)]
    pub gold_per_query: usize,
    /// Fraction of query tokens leaked into distractors.
    #[arg(long, default_value_t = 0.4)]
    pub overlap: f64,
    /// Vocabulary size.
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    /// Tokens per document.
    #[arg(long, default_value_t = 20)]
    pub doc_len: usize,
    /// Answer length in tokens.
    #[arg(long, default_value_t = 1)]
    pub answer_ngram: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML config file; omitted fields use defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory for checkpoint, metrics, and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Resume from a checkpoint; only --iterations and
    /// --checkpoint-interval may change.
    #[arg(long)]
    pub resume: Option<PathBuf>,

    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub k_train: Option<usize>,
    #[arg(long)]
    pub k_infer: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lr_reranker: Option<f64>,
    #[arg(long)]
    pub lr_generator: Option<f64>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub warm_start_iters: Option<usize>,
    /// mean or mean_std.
    #[arg(long)]
    pub advantage_norm: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// joint, reranker-only, or generator-only.
    #[arg(long = "mode", visible_alias = "training-mode")]
    pub mode: Option<String>,
    #[arg(long)]
    pub max_ngram: Option<usize>,
    #[arg(long)]
    pub candidate_cap: Option<usize>,
    #[arg(long)]
    pub checkpoint_interval: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Documents fed to the generator.
    #[arg(short, long, default_value_t = 3)]
    pub k: usize,
    /// Also write the JSON record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepTopnArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated k values.
    #[arg(long, default_value = "1,3,5")]
    pub ks: String,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => run_gen_data(&args),
        Command::Train(args) => run_train(&args),
        Command::Eval(args) => run_eval(&args),
        Command::SweepTopn(args) => run_sweep_topn(&args),
    }
}

#[derive(Serialize)]
struct FileRef {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<S: Serialize> {
    command: &'static str,
    config: S,
    inputs: BTreeMap<&'static str, FileRef>,
    outputs: BTreeMap<&'static str, String>,
}

fn file_ref(path: &Path) -> Result<FileRef> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let digest = Sha256::digest(&bytes);
    Ok(FileRef {
        path: path.display().to_string(),
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut encoded = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(format!("encoding {}", path.display()), e))?;
    encoded.push('\n');
    fs::write(path, encoded).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV_VAR}={raw:?} is not a u64"))),
        Err(_) => Ok(None),
    }
}

pub fn run_gen_data(args: &GenDataArgs) -> Result<()> {
    let seed = env_seed()?.unwrap_or(args.seed);
    let spec = SynthSpec {
        num_queries: args.queries,
        candidates_per_query: args.candidates,
        gold_docs_per_query: args.gold_per_query,
        distractor_overlap: args.overlap,
        vocab_size: args.vocab,
        doc_length: args.doc_len,
        answer_ngram_len: args.answer_ngram,
        seed,
    };
    let (corpus, dataset) = generate_task(&spec)?;

    fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(format!("creating {}", args.out.display()), e))?;
    write_corpus(&corpus, &args.out.join("corpus.jsonl"))?;
    write_dataset(&dataset, &args.out.join("dataset.jsonl"))?;
    write_json(&spec, &args.out.join("synthspec.json"))?;

    let manifest = Manifest {
        command: "gen-data",
        config: spec,
        inputs: BTreeMap::new(),
        outputs: BTreeMap::from([
            ("corpus", "corpus.jsonl".to_string()),
            ("dataset", "dataset.jsonl".to_string()),
            ("spec", "synthspec.json".to_string()),
        ]),
    };
    write_json(&manifest, &args.out.join("manifest.json"))?;

    println!(
        "wrote {} documents and {} queries to {}",
        corpus.len(),
        dataset.len(),
        args.out.display()
    );
    Ok(())
}

/// Flag overrides applied on top of file values; the listing order matches
/// the config struct.
fn apply_overrides(config: &mut TrainerConfig, args: &TrainArgs) -> Result<()> {
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.k_train {
        config.k_train = v;
    }
    if let Some(v) = args.k_infer {
        config.k_infer = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.gamma {
        config.gamma = v;
    }
    if let Some(v) = args.lr_reranker {
        config.lr_reranker = v;
    }
    if let Some(v) = args.lr_generator {
        config.lr_generator = v;
    }
    if let Some(v) = args.group_size {
        config.group_size = v;
    }
    if let Some(v) = args.temperature {
        config.temperature = v;
    }
    if let Some(v) = args.warm_start_iters {
        config.warm_start_iters = Some(v);
    }
    if let Some(v) = &args.advantage_norm {
        config.advantage_norm = match v.as_str() {
            "mean" => AdvantageNorm::Mean,
            "mean_std" | "mean-std" => AdvantageNorm::MeanStd,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown advantage_norm {other:?}; expected mean or mean_std"
                )))
            }
        };
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = &args.mode {
        config.training_mode = v.parse::<TrainingMode>()?;
    }
    if let Some(v) = args.max_ngram {
        config.max_ngram = v;
    }
    if let Some(v) = args.candidate_cap {
        config.candidate_cap = v;
    }
    if let Some(v) = args.checkpoint_interval {
        config.checkpoint_interval = v;
    }
    Ok(())
}

/// On resume the checkpoint's config is authoritative; allowing dynamics
/// changes would silently break trajectory reproducibility.
fn reject_dynamics_overrides(args: &TrainArgs) -> Result<()> {
    let mut offending: Vec<&str> = Vec::new();
    if args.config.is_some() {
        offending.push("--config");
    }
    if args.k_train.is_some() {
        offending.push("--k-train");
    }
    if args.k_infer.is_some() {
        offending.push("--k-infer");
    }
    if args.alpha.is_some() {
        offending.push("--alpha");
    }
    if args.gamma.is_some() {
        offending.push("--gamma");
    }
    if args.lr_reranker.is_some() {
        offending.push("--lr-reranker");
    }
    if args.lr_generator.is_some() {
        offending.push("--lr-generator");
    }
    if args.group_size.is_some() {
        offending.push("--group-size");
    }
    if args.temperature.is_some() {
        offending.push("--temperature");
    }
    if args.warm_start_iters.is_some() {
        offending.push("--warm-start-iters");
    }
    if args.advantage_norm.is_some() {
        offending.push("--advantage-norm");
    }
    if args.seed.is_some() {
        offending.push("--seed");
    }
    if args.mode.is_some() {
        offending.push("--mode");
    }
    if args.max_ngram.is_some() {
        offending.push("--max-ngram");
    }
    if args.candidate_cap.is_some() {
        offending.push("--candidate-cap");
    }
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "cannot change {} when resuming; the checkpoint's config is authoritative",
            offending.join(", ")
        )))
    }
}

pub fn run_train(args: &TrainArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let dataset = read_dataset(&args.dataset)?;

    let (state, mut config) = match &args.resume {
        Some(checkpoint_path) => {
            reject_dynamics_overrides(args)?;
            let (state, mut config) = load_checkpoint(checkpoint_path)?;
            if let Some(v) = args.iterations {
                config.iterations = v;
            }
            if let Some(v) = args.checkpoint_interval {
                config.checkpoint_interval = v;
            }
            (state, config)
        }
        None => {
            let mut config = match &args.config {
                Some(path) => TrainerConfig::from_toml_file(path)?,
                None => TrainerConfig::default(),
            };
            apply_overrides(&mut config, args)?;
            let config = config.resolved();
            (TrainState::new(&config), config)
        }
    };
    if let Some(seed) = env_seed()? {
        if args.resume.is_some() && seed != config.seed {
            return Err(Error::InvalidConfig(format!(
                "{SEED_ENV_VAR} disagrees with the checkpoint seed {}",
                config.seed
            )));
        }
        config.seed = seed;
    }
    config.validate()?;

    fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(format!("creating {}", args.out.display()), e))?;

    let mut inputs = BTreeMap::from([
        ("corpus", file_ref(&args.corpus)?),
        ("dataset", file_ref(&args.dataset)?),
    ]);
    if let Some(path) = &args.config {
        inputs.insert("config", file_ref(path)?);
    }
    if let Some(path) = &args.resume {
        inputs.insert("resume", file_ref(path)?);
    }
    let manifest = Manifest {
        command: "train",
        config: config.clone(),
        inputs,
        outputs: BTreeMap::from([
            ("checkpoint", "checkpoint.json".to_string()),
            ("metrics", "metrics.csv".to_string()),
        ]),
    };
    write_json(&manifest, &args.out.join("manifest.json"))?;

    let sink = RunSink::in_dir(&args.out);
    let state = train_from(state, &dataset, &corpus, &config, Some(&sink))?;

    let last = state.metrics.last();
    println!(
        "trained to iteration {} (accuracy {:.3}, hit@1 {:.3}); checkpoint at {}",
        state.iteration,
        last.map(|m| m.accuracy).unwrap_or(f64::NAN),
        last.map(|m| m.hit_at_1).unwrap_or(f64::NAN),
        sink.checkpoint_path.display()
    );
    Ok(())
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    if args.k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let (state, config) = load_checkpoint(&args.checkpoint)?;
    let corpus = read_corpus(&args.corpus)?;
    let dataset = read_dataset(&args.dataset)?;

    let report = evaluate(&state, &dataset, &corpus, args.k, &config)?;
    let line = serde_json::to_string(&report)
        .map_err(|e| Error::json("encoding eval report".to_string(), e))?;
    println!("{line}");
    if let Some(path) = &args.out {
        write_json(&report, path)?;
    }
    Ok(())
}

fn parse_ks(raw: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("invalid k value {s:?}")))
        })
        .collect::<Result<_>>()?;
    if ks.is_empty() {
        return Err(Error::InvalidConfig("empty k list".into()));
    }
    if ks.contains(&0) {
        return Err(Error::InvalidConfig("k values must be at least 1".into()));
    }
    Ok(ks)
}

pub fn run_sweep_topn(args: &SweepTopnArgs) -> Result<()> {
    let ks = parse_ks(&args.ks)?;
    let (state, config) = load_checkpoint(&args.checkpoint)?;
    let corpus = read_corpus(&args.corpus)?;
    let dataset = read_dataset(&args.dataset)?;

    let max_candidates = dataset
        .iter()
        .map(|q| q.candidate_doc_ids.len())
        .max()
        .unwrap_or(0);

    let mut csv = String::from("k,accuracy,hit_at_k\n");
    for &k in &ks {
        if k > max_candidates {
            println!(
                "note: k={k} exceeds the largest candidate pool ({max_candidates}); \
                 selection clamps to the pool size"
            );
        }
        let report = evaluate(&state, &dataset, &corpus, k, &config)?;
        let row = format!("{},{:.6},{:.6}", k, report.accuracy, report.hit_at_k);
        println!("{row}");
        csv.push_str(&row);
        csv.push('\n');
    }
    fs::write(&args.out, csv)
        .map_err(|e| Error::io(format!("writing {}", args.out.display()), e))?;
    Ok(())
}
