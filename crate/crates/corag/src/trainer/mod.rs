//! The cooperative optimization loop: per-query rollout, shared reward,
//! ledger update, label sampling, and both policy updates.
//!
//! Each training step runs, in order: score and select documents, roll out a
//! generator group, reward every sample, record outcomes in the success
//! ledger, derive preference labels (oracle warm-start early, ledger
//! sampling after), update the reranker on the margin loss, then update the
//! generator on the GRPO loss. Random streams are derived per
//! `(seed, iteration, query)` so runs are bit-reproducible and checkpoints
//! resume exactly.

mod checkpoint;
mod config;
mod metrics;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, GeneratorFragment, RerankerFragment,
    CHECKPOINT_VERSION,
};
pub use config::{TrainerConfig, TrainingMode};
pub use metrics::{append_metrics, IterationMetrics, METRICS_HEADER};

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::core::{Corpus, Query, SeededRng};
use crate::credit::{sample_labels, warm_start_labels, SuccessLedger};
use crate::error::{Error, Result};
use crate::generator::{
    build_candidates, candidate_distribution, grpo_generator_loss, rollout_group,
    update_generator, GeneratorPolicy,
};
use crate::reranker::{
    margin_rank_loss, rank_and_select, update_reranker, MarginRankLoss, RerankerPolicy,
};
use crate::reward::containment_reward;
use crate::synthenv::oracle_hit_at_k;

/// Everything that evolves during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub reranker: RerankerPolicy,
    pub generator: GeneratorPolicy,
    pub ledger: SuccessLedger,
    /// Completed iterations.
    pub iteration: usize,
    pub metrics: Vec<IterationMetrics>,
}

impl TrainState {
    pub fn new(config: &TrainerConfig) -> Self {
        TrainState {
            reranker: RerankerPolicy::zeros(),
            generator: GeneratorPolicy::zeros(config.temperature),
            ledger: SuccessLedger::new(),
            iteration: 0,
            metrics: Vec::new(),
        }
    }
}

/// Outcome of one training step on one query.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub mean_reward: f64,
    /// `None` when the ranking update was skipped because a label side was
    /// empty.
    pub rank_loss: Option<f64>,
    pub gen_loss: f64,
    pub flat_group: bool,
    /// Update aborted on a non-finite gradient.
    pub rank_aborted: bool,
    pub gen_aborted: bool,
}

/// Runs one full training step on `query` and applies the updates allowed
/// by `config.training_mode`. Disabled agents keep their forward pass (and
/// their loss is still reported) but their parameters stay frozen.
pub fn train_step(
    state: &mut TrainState,
    query: &Query,
    corpus: &Corpus,
    config: &TrainerConfig,
) -> Result<StepMetrics> {
    let cand_cfg = config.candidate_config();
    let iteration = state.iteration;

    let selected = rank_and_select(&state.reranker, query, corpus, config.k_train)?;

    let mut rollout_rng = SeededRng::derive(
        config.seed,
        &format!("rollout/{iteration}/{}", query.id),
    );
    let group = rollout_group(
        &state.generator,
        query,
        &selected,
        corpus,
        &cand_cfg,
        config.group_size,
        config.advantage_norm,
        &mut rollout_rng,
    )?;

    for reward in &group.rewards {
        state.ledger.record_outcome(&query.id, &selected, *reward);
    }

    let labels = if iteration < config.effective_warm_start() {
        warm_start_labels(query, corpus)?
    } else {
        let mut label_rng = SeededRng::derive(
            config.seed,
            &format!("labels/{iteration}/{}", query.id),
        );
        sample_labels(
            &state.ledger,
            &query.id,
            &query.candidate_doc_ids,
            config.alpha,
            &mut label_rng,
        )
    };

    let mut rank_loss = None;
    let mut rank_aborted = false;
    match margin_rank_loss(
        &state.reranker,
        query,
        corpus,
        &labels.positives(),
        &labels.negatives(),
        config.gamma,
    )? {
        MarginRankLoss::Skipped => {}
        MarginRankLoss::Evaluated(lg) => {
            rank_loss = Some(lg.loss);
            if config.training_mode != TrainingMode::GeneratorOnly {
                match update_reranker(&state.reranker, &lg.grad, config.lr_reranker) {
                    Ok(updated) => state.reranker = updated,
                    Err(Error::NonFiniteGradient { .. }) => rank_aborted = true,
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let gen = grpo_generator_loss(&state.generator, &group, query, corpus, &cand_cfg)?;
    let mut gen_aborted = false;
    if config.training_mode != TrainingMode::RerankerOnly {
        match update_generator(&state.generator, &gen.grad, config.lr_generator) {
            Ok(updated) => state.generator = updated,
            Err(Error::NonFiniteGradient { .. }) => gen_aborted = true,
            Err(e) => return Err(e),
        }
    }

    Ok(StepMetrics {
        mean_reward: group.mean_reward(),
        rank_loss,
        gen_loss: gen.loss,
        flat_group: group.is_flat(),
        rank_aborted,
        gen_aborted,
    })
}

/// Writes run artifacts during training: the append-only metrics CSV and
/// periodic plus final checkpoints.
#[derive(Debug, Clone)]
pub struct RunSink {
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

impl RunSink {
    pub fn in_dir(dir: &Path) -> Self {
        RunSink {
            metrics_path: dir.join("metrics.csv"),
            checkpoint_path: dir.join("checkpoint.json"),
        }
    }

    fn on_iteration(
        &self,
        state: &TrainState,
        config: &TrainerConfig,
        metrics: &IterationMetrics,
    ) -> Result<()> {
        append_metrics(&self.metrics_path, metrics)?;
        if config.checkpoint_interval > 0
            && state.iteration.is_multiple_of(config.checkpoint_interval)
        {
            save_checkpoint(state, config, &self.checkpoint_path)?;
        }
        Ok(())
    }

    fn on_complete(&self, state: &TrainState, config: &TrainerConfig) -> Result<()> {
        save_checkpoint(state, config, &self.checkpoint_path)
    }
}

/// Trains from a fresh state. See [`train_from`].
pub fn train(
    dataset: &[Query],
    corpus: &Corpus,
    config: &TrainerConfig,
    sink: Option<&RunSink>,
) -> Result<TrainState> {
    let config = config.resolved();
    train_from(TrainState::new(&config), dataset, corpus, &config, sink)
}

/// Continues training until `config.iterations` iterations have completed.
/// Query order is reshuffled each iteration from a seed-derived stream, so
/// resuming from a checkpoint reproduces the uninterrupted trajectory.
pub fn train_from(
    mut state: TrainState,
    dataset: &[Query],
    corpus: &Corpus,
    config: &TrainerConfig,
    sink: Option<&RunSink>,
) -> Result<TrainState> {
    let config = config.resolved();
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }

    while state.iteration < config.iterations {
        let iteration = state.iteration;
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        SeededRng::derive(config.seed, &format!("shuffle/{iteration}")).shuffle(&mut order);

        let mut reward_sum = 0.0;
        let mut rank_loss_sum = 0.0;
        let mut rank_loss_count = 0usize;
        let mut gen_loss_sum = 0.0;
        let mut rank_skips = 0usize;
        let mut flat_groups = 0usize;
        for &qi in &order {
            let query = &dataset[qi];
            let step = train_step(&mut state, query, corpus, &config)?;
            reward_sum += step.mean_reward;
            match step.rank_loss {
                Some(loss) => {
                    rank_loss_sum += loss;
                    rank_loss_count += 1;
                }
                None => rank_skips += 1,
            }
            gen_loss_sum += step.gen_loss;
            if step.flat_group {
                flat_groups += 1;
            }
            if step.rank_aborted || step.gen_aborted {
                eprintln!(
                    "warning: iteration {iteration}, query {}: non-finite gradient, update skipped",
                    query.id
                );
            }
        }
        state.iteration += 1;

        let greedy = greedy_pass(&state, dataset, corpus, config.k_infer, &config)?;
        let n = dataset.len() as f64;
        let iteration_metrics = IterationMetrics {
            iteration: state.iteration,
            mean_reward: reward_sum / n,
            accuracy: greedy.accuracy,
            hit_at_1: greedy.hit_at_1,
            loss_rank: if rank_loss_count > 0 {
                rank_loss_sum / rank_loss_count as f64
            } else {
                0.0
            },
            loss_gen: gen_loss_sum / n,
            rank_skips,
            flat_groups,
        };
        if let Some(sink) = sink {
            sink.on_iteration(&state, &config, &iteration_metrics)?;
        }
        state.metrics.push(iteration_metrics);
    }

    if let Some(sink) = sink {
        sink.on_complete(&state, &config)?;
    }
    Ok(state)
}

/// Greedy evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub k: usize,
    pub num_queries: usize,
    /// Fraction of queries whose greedy answer contains a gold answer.
    pub accuracy: f64,
    /// Fraction of queries whose selected top-k contains a gold document.
    pub hit_at_k: f64,
}

struct GreedyPass {
    accuracy: f64,
    hit_at_k: f64,
    hit_at_1: f64,
}

/// One greedy pass over the dataset; hit@1 comes from the selection prefix
/// so the per-iteration metrics need a single ranking per query.
fn greedy_pass(
    state: &TrainState,
    dataset: &[Query],
    corpus: &Corpus,
    k: usize,
    config: &TrainerConfig,
) -> Result<GreedyPass> {
    assert!(k >= 1, "evaluate: k must be at least 1");
    let cand_cfg = config.candidate_config();
    let mut correct = 0usize;
    let mut hits = 0usize;
    let mut hits_at_1 = 0usize;
    for query in dataset {
        let selected = rank_and_select(&state.reranker, query, corpus, k)?;
        if oracle_hit_at_k(&selected, query, corpus) {
            hits += 1;
        }
        if oracle_hit_at_k(&selected.truncated(1), query, corpus) {
            hits_at_1 += 1;
        }
        let candidates = build_candidates(
            query,
            &selected,
            corpus,
            &cand_cfg,
            &state.generator.feature_map,
        )?;
        if candidates.is_empty() {
            continue;
        }
        let probs = candidate_distribution(&state.generator, &candidates);
        // Argmax decoding; softmax is monotone so temperature cannot change
        // the winner. Ties keep the earliest candidate.
        let mut argmax = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[argmax] {
                argmax = i;
            }
        }
        if containment_reward(&query.gold_answers, &candidates[argmax].text).is_success() {
            correct += 1;
        }
    }
    let n = dataset.len().max(1) as f64;
    Ok(GreedyPass {
        accuracy: correct as f64 / n,
        hit_at_k: hits as f64 / n,
        hit_at_1: hits_at_1 as f64 / n,
    })
}

/// Deterministic evaluation: select top-k, decode the argmax candidate
/// (temperature ignored), score with the containment reward. `k` beyond the
/// candidate count behaves as k = N.
pub fn evaluate(
    state: &TrainState,
    dataset: &[Query],
    corpus: &Corpus,
    k: usize,
    config: &TrainerConfig,
) -> Result<EvalReport> {
    let pass = greedy_pass(state, dataset, corpus, k, config)?;
    Ok(EvalReport {
        k,
        num_queries: dataset.len(),
        accuracy: pass.accuracy,
        hit_at_k: pass.hit_at_k,
    })
}
