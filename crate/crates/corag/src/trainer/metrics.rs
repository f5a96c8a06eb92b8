//! Per-iteration training metrics and their append-only CSV form.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "iteration,mean_reward,accuracy,hit_at_1,loss_rank,loss_gen,rank_skips,flat_groups";

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Mean rollout reward across all samples this iteration.
    pub mean_reward: f64,
    /// Greedy evaluation accuracy at `k_infer`.
    pub accuracy: f64,
    /// Greedy evaluation hit rate at k = 1 against oracle gold markers.
    pub hit_at_1: f64,
    /// Mean margin loss over the queries whose ranking update ran.
    pub loss_rank: f64,
    /// Mean generator loss over all queries.
    pub loss_gen: f64,
    /// Queries whose ranking update was skipped (a label side was empty).
    pub rank_skips: usize,
    /// Rollout groups with all-equal rewards (no-op generator update).
    pub flat_groups: usize,
}

impl IterationMetrics {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.iteration,
            self.mean_reward,
            self.accuracy,
            self.hit_at_1,
            self.loss_rank,
            self.loss_gen,
            self.rank_skips,
            self.flat_groups
        )
    }
}

/// Appends one row, writing the header first when the file is new.
pub fn append_metrics(path: &Path, metrics: &IterationMetrics) -> Result<()> {
    let fresh = !path.exists();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("opening metrics file {}", path.display()), e))?;
    let mut payload = String::new();
    if fresh {
        payload.push_str(METRICS_HEADER);
        payload.push('\n');
    }
    payload.push_str(&metrics.to_csv_row());
    payload.push('\n');
    file.write_all(payload.as_bytes())
        .map_err(|e| Error::io(format!("appending metrics to {}", path.display()), e))
}
