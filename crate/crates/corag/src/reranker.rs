//! The reranker agent: lexical feature scoring, softmax policy over
//! candidates, top-K selection, and both ranking losses with analytic
//! gradients.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::core::{Corpus, DocId, Document, Query};
use crate::error::{Error, Result};
use crate::numeric::{all_finite, dot, softmax};

/// Number of reranker features.
pub const RERANKER_FEATURE_DIM: usize = 5;

/// Version tag stored in checkpoints; bump when the feature definitions
/// change.
pub const RERANKER_FEATURE_VERSION: &str = "lexical-overlap-v1";

/// Lexical query-document feature map.
///
/// Features, in order:
/// 1. count of document token occurrences that appear in the query
/// 2. the same count divided by document length
/// 3. fraction of distinct query tokens present in the document
/// 4. document length in tokens divided by `doc_len_scale`
/// 5. constant bias 1.0
///
/// The map never reads `Document::gold_for`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalFeatureMap {
    pub doc_len_scale: f64,
}

impl Default for LexicalFeatureMap {
    fn default() -> Self {
        LexicalFeatureMap {
            doc_len_scale: 100.0,
        }
    }
}

impl LexicalFeatureMap {
    pub fn features(&self, query: &Query, doc: &Document) -> [f64; RERANKER_FEATURE_DIM] {
        let query_set: BTreeSet<&str> = query.text.iter().map(String::as_str).collect();
        let overlap = doc
            .text
            .iter()
            .filter(|t| query_set.contains(t.as_str()))
            .count() as f64;
        let doc_len = doc.text.len() as f64;
        let covered = query_set
            .iter()
            .filter(|t| doc.text.iter().any(|d| d == *t))
            .count() as f64;
        let coverage = if query_set.is_empty() {
            0.0
        } else {
            covered / query_set.len() as f64
        };
        [
            overlap,
            overlap / doc_len,
            coverage,
            doc_len / self.doc_len_scale,
            1.0,
        ]
    }
}

/// Linear scoring policy over [`LexicalFeatureMap`] features. The softmax of
/// the candidate scores defines the policy distribution over documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankerPolicy {
    pub theta: Vec<f64>,
    pub feature_map: LexicalFeatureMap,
}

impl RerankerPolicy {
    /// Zero-initialized policy: every document scores 0 until trained.
    pub fn zeros() -> Self {
        RerankerPolicy {
            theta: vec![0.0; RERANKER_FEATURE_DIM],
            feature_map: LexicalFeatureMap::default(),
        }
    }

    pub fn with_theta(theta: Vec<f64>) -> Self {
        assert_eq!(
            theta.len(),
            RERANKER_FEATURE_DIM,
            "theta dimension must equal the feature dimension"
        );
        RerankerPolicy {
            theta,
            feature_map: LexicalFeatureMap::default(),
        }
    }
}

/// A candidate with its relevance score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDocument {
    pub doc_id: DocId,
    pub score: f64,
}

/// Top-K selection: doc ids ordered by descending score, ties broken by
/// ascending doc id.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSet {
    entries: Vec<ScoredDocument>,
}

impl SelectedSet {
    /// Builds a selection from pre-scored entries, enforcing the ordering
    /// and uniqueness invariants.
    pub fn from_entries(entries: Vec<ScoredDocument>) -> Self {
        assert!(
            entries.windows(2).all(|w| w[0].score >= w[1].score),
            "SelectedSet: scores must be non-increasing"
        );
        let mut ids: Vec<&DocId> = entries.iter().map(|e| &e.doc_id).collect();
        ids.sort();
        assert!(
            ids.windows(2).all(|w| w[0] != w[1]),
            "SelectedSet: duplicate doc ids"
        );
        SelectedSet { entries }
    }

    pub fn entries(&self) -> &[ScoredDocument] {
        &self.entries
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &DocId> {
        self.entries.iter().map(|e| &e.doc_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The selection truncated to its first `k` entries.
    pub fn truncated(&self, k: usize) -> SelectedSet {
        SelectedSet {
            entries: self.entries.iter().take(k).cloned().collect(),
        }
    }
}

/// Loss value with its gradient with respect to `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Outcome of the margin ranking loss. An empty positive or negative set
/// yields `Skipped` so callers cannot mistake a missing update for a
/// satisfied margin.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginRankLoss {
    Skipped,
    Evaluated(LossAndGrad),
}

/// Relevance score `theta . f(q, d)`.
pub fn score(policy: &RerankerPolicy, query: &Query, doc: &Document) -> f64 {
    let features = policy.feature_map.features(query, doc);
    assert_eq!(
        policy.theta.len(),
        features.len(),
        "score: theta dimension mismatch"
    );
    dot(&policy.theta, &features)
}

fn score_candidates(
    policy: &RerankerPolicy,
    query: &Query,
    corpus: &Corpus,
) -> Result<Vec<ScoredDocument>> {
    query
        .candidate_doc_ids
        .iter()
        .map(|id| {
            let doc = corpus.get(id)?;
            Ok(ScoredDocument {
                doc_id: id.clone(),
                score: score(policy, query, doc),
            })
        })
        .collect()
}

/// Scores every candidate of `query` and returns the `min(k, N)` best in
/// descending score order, ties broken by ascending doc id.
pub fn rank_and_select(
    policy: &RerankerPolicy,
    query: &Query,
    corpus: &Corpus,
    k: usize,
) -> Result<SelectedSet> {
    assert!(k >= 1, "rank_and_select: k must be at least 1");
    let mut scored = score_candidates(policy, query, corpus)?;
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    scored.truncate(k);
    Ok(SelectedSet { entries: scored })
}

/// Softmax policy distribution over the query's candidates, in candidate
/// order. Max-score subtraction keeps the computation stable for large
/// scores.
pub fn softmax_distribution(
    policy: &RerankerPolicy,
    query: &Query,
    corpus: &Corpus,
) -> Result<Vec<f64>> {
    let scored = score_candidates(policy, query, corpus)?;
    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    Ok(softmax(&scores))
}

/// Group-relative policy-gradient loss for the reranker:
/// `-(1/M) * sum_i A_i * log pi(d_i)` where `M` counts candidates with
/// nonzero advantage. All-zero advantages yield zero loss and gradient.
///
/// `advantages` must align with `query.candidate_doc_ids`.
pub fn grpo_rerank_loss(
    policy: &RerankerPolicy,
    query: &Query,
    corpus: &Corpus,
    advantages: &[f64],
) -> Result<LossAndGrad> {
    assert_eq!(
        advantages.len(),
        query.candidate_doc_ids.len(),
        "grpo_rerank_loss: advantages must align with the candidate list"
    );
    let active = advantages.iter().filter(|a| **a != 0.0).count();
    if active == 0 {
        return Ok(LossAndGrad {
            loss: 0.0,
            grad: vec![0.0; policy.theta.len()],
        });
    }
    let scale = 1.0 / active as f64;

    let probs = softmax_distribution(policy, query, corpus)?;
    let advantage_sum: f64 = advantages.iter().sum();

    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.theta.len()];
    for (i, id) in query.candidate_doc_ids.iter().enumerate() {
        let doc = corpus.get(id)?;
        let features = policy.feature_map.features(query, doc);
        if advantages[i] != 0.0 {
            loss -= scale * advantages[i] * probs[i].ln();
        }
        // d loss / d s_i = -scale * (A_i - pi_i * sum(A))
        let dscore = -scale * (advantages[i] - probs[i] * advantage_sum);
        for (g, f) in grad.iter_mut().zip(features.iter()) {
            *g += dscore * f;
        }
    }
    Ok(LossAndGrad { loss, grad })
}

/// Margin-based pairwise ranking loss over positive/negative document sets:
/// `sum over (d+, d-) of max(0, s(d-) - s(d+) + gamma)`.
///
/// The hinge subgradient at an exactly-zero argument is defined as zero.
/// Positive and negative sets must be disjoint and `gamma` positive; both
/// are contract violations otherwise.
pub fn margin_rank_loss(
    policy: &RerankerPolicy,
    query: &Query,
    corpus: &Corpus,
    positives: &[DocId],
    negatives: &[DocId],
    gamma: f64,
) -> Result<MarginRankLoss> {
    assert!(gamma > 0.0, "margin_rank_loss: gamma must be positive");
    let pos_set: BTreeSet<&DocId> = positives.iter().collect();
    assert!(
        negatives.iter().all(|n| !pos_set.contains(n)),
        "margin_rank_loss: positives and negatives must be disjoint"
    );
    if positives.is_empty() || negatives.is_empty() {
        return Ok(MarginRankLoss::Skipped);
    }

    let featurize = |ids: &[DocId]| -> Result<Vec<([f64; RERANKER_FEATURE_DIM], f64)>> {
        ids.iter()
            .map(|id| {
                let features = policy.feature_map.features(query, corpus.get(id)?);
                let score = dot(&policy.theta, &features);
                Ok((features, score))
            })
            .collect()
    };
    let pos = featurize(positives)?;
    let neg = featurize(negatives)?;

    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.theta.len()];
    for (pos_features, pos_score) in &pos {
        for (neg_features, neg_score) in &neg {
            let violation = neg_score - pos_score + gamma;
            if violation > 0.0 {
                loss += violation;
                for ((g, nf), pf) in grad.iter_mut().zip(neg_features).zip(pos_features) {
                    *g += nf - pf;
                }
            }
        }
    }
    Ok(MarginRankLoss::Evaluated(LossAndGrad { loss, grad }))
}

/// One gradient-descent step: `theta <- theta - learning_rate * gradient`.
///
/// A non-finite gradient aborts the step and reports it instead of
/// corrupting the policy.
pub fn update_reranker(
    policy: &RerankerPolicy,
    gradient: &[f64],
    learning_rate: f64,
) -> Result<RerankerPolicy> {
    assert_eq!(
        gradient.len(),
        policy.theta.len(),
        "update_reranker: gradient dimension mismatch"
    );
    if !all_finite(gradient) {
        return Err(Error::NonFiniteGradient { agent: "reranker" });
    }
    let mut updated = policy.clone();
    for (t, g) in updated.theta.iter_mut().zip(gradient) {
        *t -= learning_rate * g;
    }
    Ok(updated)
}
