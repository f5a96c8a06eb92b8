//! Versioned checkpoint bundling both policy fragments, the success ledger,
//! the iteration counter, and the resolved config.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::credit::{LedgerEntry, SuccessLedger};
use crate::error::{Error, Result};
use crate::generator::{
    CandidateFeatureMap, GeneratorPolicy, GENERATOR_FEATURE_DIM, GENERATOR_FEATURE_VERSION,
};
use crate::reranker::{
    LexicalFeatureMap, RerankerPolicy, RERANKER_FEATURE_DIM, RERANKER_FEATURE_VERSION,
};
use crate::trainer::{TrainState, TrainerConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankerFragment {
    pub feature_version: String,
    pub dim: usize,
    pub theta: Vec<f64>,
    pub doc_len_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFragment {
    pub feature_version: String,
    pub dim: usize,
    pub phi: Vec<f64>,
    pub tau: f64,
    pub len_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub iteration: usize,
    pub config: TrainerConfig,
    pub reranker: RerankerFragment,
    pub generator: GeneratorFragment,
    pub ledger: Vec<LedgerEntry>,
}

impl Checkpoint {
    pub fn from_state(state: &TrainState, config: &TrainerConfig) -> Self {
        let config = config.resolved();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: config.dynamics_hash(),
            iteration: state.iteration,
            reranker: RerankerFragment {
                feature_version: RERANKER_FEATURE_VERSION.to_string(),
                dim: RERANKER_FEATURE_DIM,
                theta: state.reranker.theta.clone(),
                doc_len_scale: state.reranker.feature_map.doc_len_scale,
            },
            generator: GeneratorFragment {
                feature_version: GENERATOR_FEATURE_VERSION.to_string(),
                dim: GENERATOR_FEATURE_DIM,
                phi: state.generator.phi.clone(),
                tau: state.generator.tau,
                len_scale: state.generator.feature_map.len_scale,
            },
            ledger: state.ledger.entries().collect(),
            config,
        }
    }

    /// Reconstructs the training state (metrics history starts empty) and
    /// the config the run was using.
    pub fn into_state(self) -> Result<(TrainState, TrainerConfig)> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint version {} but this build reads {}",
                self.version, CHECKPOINT_VERSION
            )));
        }
        if self.reranker.feature_version != RERANKER_FEATURE_VERSION
            || self.reranker.dim != RERANKER_FEATURE_DIM
        {
            return Err(Error::CheckpointMismatch(format!(
                "reranker fragment is {} (dim {}), expected {} (dim {})",
                self.reranker.feature_version,
                self.reranker.dim,
                RERANKER_FEATURE_VERSION,
                RERANKER_FEATURE_DIM
            )));
        }
        if self.generator.feature_version != GENERATOR_FEATURE_VERSION
            || self.generator.dim != GENERATOR_FEATURE_DIM
        {
            return Err(Error::CheckpointMismatch(format!(
                "generator fragment is {} (dim {}), expected {} (dim {})",
                self.generator.feature_version,
                self.generator.dim,
                GENERATOR_FEATURE_VERSION,
                GENERATOR_FEATURE_DIM
            )));
        }
        if self.reranker.theta.len() != self.reranker.dim
            || self.generator.phi.len() != self.generator.dim
        {
            return Err(Error::CheckpointMismatch(
                "parameter vector length disagrees with fragment dim".into(),
            ));
        }
        let recomputed = self.config.dynamics_hash();
        if recomputed != self.config_hash {
            return Err(Error::CheckpointMismatch(
                "stored config hash does not match the stored config".into(),
            ));
        }
        self.config.validate()?;

        let state = TrainState {
            reranker: RerankerPolicy {
                theta: self.reranker.theta,
                feature_map: LexicalFeatureMap {
                    doc_len_scale: self.reranker.doc_len_scale,
                },
            },
            generator: GeneratorPolicy {
                phi: self.generator.phi,
                tau: self.generator.tau,
                feature_map: CandidateFeatureMap {
                    len_scale: self.generator.len_scale,
                },
            },
            ledger: SuccessLedger::from_entries(self.ledger)?,
            iteration: self.iteration,
            metrics: Vec::new(),
        };
        Ok((state, self.config))
    }
}

pub fn save_checkpoint(state: &TrainState, config: &TrainerConfig, path: &Path) -> Result<()> {
    let checkpoint = Checkpoint::from_state(state, config);
    let file = File::create(path)
        .map_err(|e| Error::io(format!("creating checkpoint {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &checkpoint)
        .map_err(|e| Error::json(format!("encoding checkpoint {}", path.display()), e))?;
    out.write_all(b"\n")
        .map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))?;
    out.flush()
        .map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<(TrainState, TrainerConfig)> {
    let file = File::open(path)
        .map_err(|e| Error::io(format!("opening checkpoint {}", path.display()), e))?;
    let checkpoint: Checkpoint = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::json(format!("decoding checkpoint {}", path.display()), e))?;
    checkpoint.into_state()
}
