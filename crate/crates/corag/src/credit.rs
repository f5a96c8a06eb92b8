//! Credit assignment: turns delayed task-level rewards into document-level
//! stochastic preference labels.
//!
//! Each time a document is part of a selection that produced a generation,
//! the ledger records one trial and whether the task succeeded. A document's
//! empirical success rate is smoothed into a Bernoulli parameter bounded
//! away from 0 and 1, and sampled labels partition candidates into positive
//! and negative sets for the ranking loss.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::core::{contains_subsequence, normalize_text, Corpus, DocId, Query, QueryId, SeededRng};
use crate::error::{Error, Result};
use crate::reranker::SelectedSet;
use crate::reward::Reward;

/// Per (query, document) success/trial counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuccessLedger {
    counts: BTreeMap<(QueryId, DocId), Counts>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub successes: u64,
    pub trials: u64,
}

/// One serialized ledger row; the checkpoint fragment is a list of these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub query_id: QueryId,
    pub doc_id: DocId,
    pub successes: u64,
    pub trials: u64,
}

impl SuccessLedger {
    pub fn new() -> Self {
        SuccessLedger::default()
    }

    /// Records one trial for every document in `selected`, counting a
    /// success when the shared reward was 1.
    pub fn record_outcome(&mut self, query_id: &QueryId, selected: &SelectedSet, reward: Reward) {
        for doc_id in selected.doc_ids() {
            let entry = self
                .counts
                .entry((query_id.clone(), doc_id.clone()))
                .or_default();
            entry.trials += 1;
            entry.successes += reward.value();
        }
    }

    pub fn counts(&self, query_id: &QueryId, doc_id: &DocId) -> Counts {
        self.counts
            .get(&(query_id.clone(), doc_id.clone()))
            .copied()
            .unwrap_or_default()
    }

    /// Empirical success rate for a tried document. Querying an untried
    /// document is an error, never a silent default.
    pub fn mean_success(&self, query_id: &QueryId, doc_id: &DocId) -> Result<f64> {
        let c = self.counts(query_id, doc_id);
        if c.trials == 0 {
            return Err(Error::UntriedDocument {
                query_id: query_id.clone(),
                doc_id: doc_id.clone(),
            });
        }
        Ok(c.successes as f64 / c.trials as f64)
    }

    pub fn entries(&self) -> impl Iterator<Item = LedgerEntry> + '_ {
        self.counts.iter().map(|((q, d), c)| LedgerEntry {
            query_id: q.clone(),
            doc_id: d.clone(),
            successes: c.successes,
            trials: c.trials,
        })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = LedgerEntry>) -> Result<Self> {
        let mut ledger = SuccessLedger::new();
        for e in entries {
            if e.successes > e.trials {
                return Err(Error::InvalidConfig(format!(
                    "ledger entry ({}, {}): successes {} exceed trials {}",
                    e.query_id, e.doc_id, e.successes, e.trials
                )));
            }
            let key = (e.query_id.clone(), e.doc_id.clone());
            if ledger.counts.contains_key(&key) {
                return Err(Error::InvalidConfig(format!(
                    "ledger entry ({}, {}) appears twice",
                    e.query_id, e.doc_id
                )));
            }
            ledger.counts.insert(
                key,
                Counts {
                    successes: e.successes,
                    trials: e.trials,
                },
            );
        }
        Ok(ledger)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Maps an empirical success rate into the smoothed Bernoulli parameter
/// `alpha + (1 - 2 alpha) * lbar`, always inside `[alpha, 1 - alpha]` so no
/// document is ever labeled deterministically.
///
/// `lbar` outside `[0, 1]` or `alpha` outside `(0, 0.5)` are contract
/// violations.
pub fn smoothed_parameter(lbar: f64, alpha: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&lbar),
        "smoothed_parameter: lbar {lbar} outside [0, 1]"
    );
    assert!(
        alpha > 0.0 && alpha < 0.5,
        "smoothed_parameter: alpha {alpha} outside (0, 0.5)"
    );
    alpha + (1.0 - 2.0 * alpha) * lbar
}

/// Stochastic preference labels partitioning tried candidates into positive
/// and negative document sets. Untried candidates appear in neither.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreferenceLabels {
    /// (doc id, sampled bit) for each labeled candidate, in candidate order.
    labels: Vec<(DocId, bool)>,
}

impl PreferenceLabels {
    pub fn from_bits(labels: Vec<(DocId, bool)>) -> Self {
        PreferenceLabels { labels }
    }

    pub fn positives(&self) -> Vec<DocId> {
        self.labels
            .iter()
            .filter(|(_, bit)| *bit)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn negatives(&self) -> Vec<DocId> {
        self.labels
            .iter()
            .filter(|(_, bit)| !*bit)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn bits(&self) -> &[(DocId, bool)] {
        &self.labels
    }

    /// True when either side is empty, in which case the ranking update must
    /// be skipped (and the skip reported).
    pub fn one_side_empty(&self) -> bool {
        let pos = self.labels.iter().filter(|(_, b)| *b).count();
        pos == 0 || pos == self.labels.len()
    }
}

/// Samples a preference label for every tried candidate:
/// `p_i ~ Bernoulli(smoothed_parameter(lbar, alpha))`, bit 1 landing the
/// document in the positive set. Candidates with no trials are excluded from
/// both sets; either output side may be empty and callers must handle the
/// skip case.
pub fn sample_labels(
    ledger: &SuccessLedger,
    query_id: &QueryId,
    candidates: &[DocId],
    alpha: f64,
    rng: &mut SeededRng,
) -> PreferenceLabels {
    let mut labels = Vec::new();
    for doc_id in candidates {
        let c = ledger.counts(query_id, doc_id);
        if c.trials == 0 {
            continue;
        }
        let lbar = c.successes as f64 / c.trials as f64;
        let p = smoothed_parameter(lbar, alpha);
        labels.push((doc_id.clone(), rng.bernoulli(p)));
    }
    PreferenceLabels::from_bits(labels)
}

/// Oracle warm-start labels for the synthetic environment: candidates whose
/// text contains one of the query's gold answers are positive, all others
/// negative. Stands in for coarse annotations during the first training
/// iterations, before the ledger has signal.
pub fn warm_start_labels(query: &Query, corpus: &Corpus) -> Result<PreferenceLabels> {
    let golds: Vec<Vec<String>> = query
        .gold_answers
        .iter()
        .map(|g| normalize_text(g))
        .filter(|g| !g.is_empty())
        .collect();
    let mut labels = Vec::new();
    for doc_id in &query.candidate_doc_ids {
        let doc = corpus.get(doc_id)?;
        let is_gold = golds.iter().any(|g| contains_subsequence(&doc.text, g));
        labels.push((doc_id.clone(), is_gold));
    }
    Ok(PreferenceLabels::from_bits(labels))
}
