//! Training configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generator::{AdvantageNorm, CandidateConfig};

/// Which agents receive parameter updates; the other agent's forward pass
/// still runs either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    Joint,
    RerankerOnly,
    GeneratorOnly,
}

impl FromStr for TrainingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(TrainingMode::Joint),
            "reranker_only" | "reranker-only" => Ok(TrainingMode::RerankerOnly),
            "generator_only" | "generator-only" => Ok(TrainingMode::GeneratorOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown training mode {other:?}; expected joint, reranker-only, or generator-only"
            ))),
        }
    }
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrainingMode::Joint => "joint",
            TrainingMode::RerankerOnly => "reranker_only",
            TrainingMode::GeneratorOnly => "generator_only",
        };
        f.write_str(s)
    }
}

/// All knobs of the training loop. The config file is TOML with exactly
/// these field names; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    /// Total training iterations (epochs over the dataset).
    pub iterations: usize,
    /// Documents selected per training step.
    pub k_train: usize,
    /// Documents selected at evaluation time.
    pub k_infer: usize,
    /// Label-smoothing strength, in (0, 0.5).
    pub alpha: f64,
    /// Ranking margin.
    pub gamma: f64,
    pub lr_reranker: f64,
    pub lr_generator: f64,
    /// Rollout samples per query per step.
    pub group_size: usize,
    /// Generator sampling temperature.
    pub temperature: f64,
    /// Iterations trained on oracle warm-start labels before switching to
    /// ledger-sampled labels. Unset resolves to 10% of `iterations`.
    pub warm_start_iters: Option<usize>,
    pub advantage_norm: AdvantageNorm,
    pub seed: u64,
    pub training_mode: TrainingMode,
    /// Longest answer n-gram the generator may extract.
    pub max_ngram: usize,
    /// Cap on answer candidates per query.
    pub candidate_cap: usize,
    /// Write a checkpoint every this many iterations (0 = final only).
    pub checkpoint_interval: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            iterations: 200,
            k_train: 1,
            k_infer: 3,
            alpha: 0.1,
            gamma: 1.0,
            // The 5:1 reranker/generator ratio, scaled up for the linear
            // policies used here.
            lr_reranker: 5e-2,
            lr_generator: 1e-2,
            group_size: 8,
            temperature: 0.7,
            warm_start_iters: None,
            advantage_norm: AdvantageNorm::MeanStd,
            seed: 42,
            training_mode: TrainingMode::Joint,
            max_ngram: 2,
            candidate_cap: 256,
            checkpoint_interval: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k_train < 1 {
            return fail("k_train must be at least 1".into());
        }
        if self.k_infer < 1 {
            return fail("k_infer must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return fail(format!("alpha {} outside (0, 0.5)", self.alpha));
        }
        if self.gamma <= 0.0 {
            return fail(format!("gamma {} must be positive", self.gamma));
        }
        if self.lr_reranker <= 0.0 || self.lr_generator <= 0.0 {
            return fail("learning rates must be positive".into());
        }
        if self.group_size < 2 {
            return fail("group_size must be at least 2".into());
        }
        if self.temperature <= 0.0 {
            return fail(format!("temperature {} must be positive", self.temperature));
        }
        if self.max_ngram < 1 {
            return fail("max_ngram must be at least 1".into());
        }
        if self.candidate_cap < 1 {
            return fail("candidate_cap must be at least 1".into());
        }
        Ok(())
    }

    /// The warm-start window, resolving the 10%-of-iterations default.
    pub fn effective_warm_start(&self) -> usize {
        self.warm_start_iters.unwrap_or(self.iterations / 10)
    }

    /// Copy with `warm_start_iters` materialized, so checkpoints pin the
    /// window that was actually used.
    pub fn resolved(&self) -> TrainerConfig {
        TrainerConfig {
            warm_start_iters: Some(self.effective_warm_start()),
            ..self.clone()
        }
    }

    pub fn candidate_config(&self) -> CandidateConfig {
        CandidateConfig {
            max_ngram: self.max_ngram,
            cap: self.candidate_cap,
        }
    }

    /// Hash of every field that shapes per-step dynamics. Horizon and
    /// checkpoint cadence are excluded so an extended run can resume from a
    /// shorter run's checkpoint.
    pub fn dynamics_hash(&self) -> String {
        let mut canonical = self.resolved();
        canonical.iterations = 0;
        canonical.checkpoint_interval = 0;
        let encoded =
            serde_json::to_string(&canonical).expect("TrainerConfig serialization cannot fail");
        let digest = Sha256::digest(encoded.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml_str(raw: &str) -> Result<Self> {
        let config: TrainerConfig = toml::from_str(raw)
            .map_err(|e| Error::InvalidConfig(format!("config file: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml_str(&raw)
    }
}
