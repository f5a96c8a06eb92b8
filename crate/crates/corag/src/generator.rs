//! The generator agent: extractive answer candidates, a temperature-scaled
//! softmax policy over them, GRPO rollout groups with group-relative
//! advantages, and the policy-gradient update.
//!
//! The policy is a linear model over candidate features rather than an
//! autoregressive decoder, so log-probabilities and gradients are exact.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::core::{Corpus, Document, Query, QueryId, SeededRng};
use crate::error::{Error, Result};
use crate::numeric::{all_finite, dot, softmax};
use crate::reranker::{LossAndGrad, SelectedSet};
use crate::reward::{containment_reward, Reward};

/// Number of generator features.
pub const GENERATOR_FEATURE_DIM: usize = 5;

/// Version tag stored in checkpoints.
pub const GENERATOR_FEATURE_VERSION: &str = "extractive-ngram-v1";

/// Answer-candidate construction settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateConfig {
    /// Maximum n-gram length extracted from selected documents.
    pub max_ngram: usize,
    /// Hard cap on the candidate list; enumeration stops deterministically
    /// once reached.
    pub cap: usize,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            max_ngram: 2,
            cap: 256,
        }
    }
}

/// Candidate feature map over `(query, selected documents, candidate)`.
///
/// Features, in order:
/// 1. occurrences of the candidate n-gram in each selected document, each
///    occurrence weighted by 1/rank of the containing document
/// 2. 1.0 if the candidate occurs in the top-ranked document, else 0.0
/// 3. candidate length in tokens divided by `len_scale`
/// 4. count of candidate tokens that appear in the query
/// 5. constant bias 1.0
///
/// The map never reads `Document::gold_for`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFeatureMap {
    pub len_scale: f64,
}

impl Default for CandidateFeatureMap {
    fn default() -> Self {
        CandidateFeatureMap { len_scale: 10.0 }
    }
}

fn occurrences(haystack: &[String], needle: &[String]) -> usize {
    if needle.is_empty() || needle.len() > haystack.len() {
        return 0;
    }
    haystack.windows(needle.len()).filter(|w| *w == needle).count()
}

impl CandidateFeatureMap {
    pub fn features(
        &self,
        query: &Query,
        docs: &[&Document],
        candidate_tokens: &[String],
    ) -> [f64; GENERATOR_FEATURE_DIM] {
        let query_set: BTreeSet<&str> = query.text.iter().map(String::as_str).collect();
        let mut weighted = 0.0;
        for (rank0, doc) in docs.iter().enumerate() {
            let occ = occurrences(&doc.text, candidate_tokens) as f64;
            weighted += occ / (rank0 + 1) as f64;
        }
        let in_top = docs
            .first()
            .map(|d| occurrences(&d.text, candidate_tokens) > 0)
            .unwrap_or(false);
        let query_overlap = candidate_tokens
            .iter()
            .filter(|t| query_set.contains(t.as_str()))
            .count() as f64;
        [
            weighted,
            in_top as u8 as f64,
            candidate_tokens.len() as f64 / self.len_scale,
            query_overlap,
            1.0,
        ]
    }
}

/// An extractive answer candidate with its precomputed features.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerCandidate {
    pub text: String,
    pub features: [f64; GENERATOR_FEATURE_DIM],
}

/// Linear softmax policy over answer candidates with sampling temperature
/// `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPolicy {
    pub phi: Vec<f64>,
    pub tau: f64,
    pub feature_map: CandidateFeatureMap,
}

impl GeneratorPolicy {
    pub fn zeros(tau: f64) -> Self {
        assert!(tau > 0.0, "GeneratorPolicy: tau must be positive");
        GeneratorPolicy {
            phi: vec![0.0; GENERATOR_FEATURE_DIM],
            tau,
            feature_map: CandidateFeatureMap::default(),
        }
    }

    pub fn with_phi(phi: Vec<f64>, tau: f64) -> Self {
        assert_eq!(phi.len(), GENERATOR_FEATURE_DIM);
        assert!(tau > 0.0, "GeneratorPolicy: tau must be positive");
        GeneratorPolicy {
            phi,
            tau,
            feature_map: CandidateFeatureMap::default(),
        }
    }
}

/// Enumerates all distinct token n-grams (n <= `max_ngram`) of the selected
/// documents as answer candidates, with features from `map`.
///
/// Order is deterministic: by document rank, then n-gram length, then start
/// position, keeping the first occurrence of each distinct candidate and
/// truncating at `cfg.cap`. An empty selection is a contract violation;
/// empty documents yield an empty list.
pub fn build_candidates(
    query: &Query,
    selected: &SelectedSet,
    corpus: &Corpus,
    cfg: &CandidateConfig,
    map: &CandidateFeatureMap,
) -> Result<Vec<AnswerCandidate>> {
    assert!(cfg.max_ngram >= 1, "build_candidates: max_ngram must be >= 1");
    assert!(!selected.is_empty(), "build_candidates: empty selection");
    let docs: Vec<&Document> = selected
        .doc_ids()
        .map(|id| corpus.get(id))
        .collect::<Result<_>>()?;

    // One pass over every window, tallying per-rank occurrence counts.
    // Candidates past the cap are not tracked, but counts for tracked
    // candidates keep accumulating across all documents, so features are
    // identical to the per-candidate reference map.
    struct Accum {
        tokens: Vec<String>,
        rank_counts: Vec<u32>,
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut accums: Vec<Accum> = Vec::new();
    for (rank0, doc) in docs.iter().enumerate() {
        for n in 1..=cfg.max_ngram.min(doc.text.len()) {
            for window in doc.text.windows(n) {
                let joined = window.join(" ");
                let slot = match index.get(&joined) {
                    Some(&i) => Some(i),
                    None if accums.len() < cfg.cap => {
                        let i = accums.len();
                        index.insert(joined, i);
                        accums.push(Accum {
                            tokens: window.to_vec(),
                            rank_counts: vec![0; docs.len()],
                        });
                        Some(i)
                    }
                    None => None,
                };
                if let Some(i) = slot {
                    accums[i].rank_counts[rank0] += 1;
                }
            }
        }
    }

    let query_set: BTreeSet<&str> = query.text.iter().map(String::as_str).collect();
    Ok(accums
        .into_iter()
        .map(|a| {
            let mut weighted = 0.0;
            for (rank0, count) in a.rank_counts.iter().enumerate() {
                weighted += *count as f64 / (rank0 + 1) as f64;
            }
            let query_overlap = a
                .tokens
                .iter()
                .filter(|t| query_set.contains(t.as_str()))
                .count() as f64;
            AnswerCandidate {
                text: a.tokens.join(" "),
                features: [
                    weighted,
                    (a.rank_counts[0] > 0) as u8 as f64,
                    a.tokens.len() as f64 / map.len_scale,
                    query_overlap,
                    1.0,
                ],
            }
        })
        .collect())
}

/// Policy probabilities over `candidates`: `softmax(phi . g / tau)`.
pub fn candidate_distribution(policy: &GeneratorPolicy, candidates: &[AnswerCandidate]) -> Vec<f64> {
    assert!(!candidates.is_empty(), "candidate_distribution: no candidates");
    let logits: Vec<f64> = candidates
        .iter()
        .map(|c| dot(&policy.phi, &c.features) / policy.tau)
        .collect();
    softmax(&logits)
}

/// One sampled response with its log-probability under the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedAnswer {
    pub text: String,
    pub log_prob: f64,
    pub candidate_index: usize,
}

/// Samples one response from the policy distribution over the selected
/// documents' candidates. Fails if no candidates can be built.
pub fn generate(
    policy: &GeneratorPolicy,
    query: &Query,
    selected: &SelectedSet,
    corpus: &Corpus,
    cfg: &CandidateConfig,
    rng: &mut SeededRng,
) -> Result<GeneratedAnswer> {
    let candidates = build_candidates(query, selected, corpus, cfg, &policy.feature_map)?;
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let probs = candidate_distribution(policy, &candidates);
    Ok(sample_one(&candidates, &probs, rng))
}

fn sample_one(
    candidates: &[AnswerCandidate],
    probs: &[f64],
    rng: &mut SeededRng,
) -> GeneratedAnswer {
    let idx = rng.categorical(probs);
    GeneratedAnswer {
        text: candidates[idx].text.clone(),
        log_prob: probs[idx].ln(),
        candidate_index: idx,
    }
}

/// How rollout rewards are turned into group-relative advantages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageNorm {
    /// Subtract the group mean.
    Mean,
    /// Subtract the group mean and divide by the group standard deviation.
    MeanStd,
}

/// Group-relative advantages: `(r_i - mean) / (std + 1e-8)` with the
/// population standard deviation, or plain mean subtraction under
/// [`AdvantageNorm::Mean`]. A zero-variance group yields exactly-zero
/// advantages. Fewer than two rewards is a contract violation.
pub fn compute_advantages(rewards: &[f64], norm: AdvantageNorm) -> Vec<f64> {
    assert!(
        rewards.len() >= 2,
        "compute_advantages: need at least two rewards"
    );
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let variance = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    if variance == 0.0 {
        return vec![0.0; rewards.len()];
    }
    match norm {
        AdvantageNorm::Mean => rewards.iter().map(|r| r - mean).collect(),
        AdvantageNorm::MeanStd => {
            let denom = variance.sqrt() + 1e-8;
            rewards.iter().map(|r| (r - mean) / denom).collect()
        }
    }
}

/// A group of sampled responses for one query with rewards and
/// group-relative advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub query_id: QueryId,
    pub selected: SelectedSet,
    pub responses: Vec<GeneratedAnswer>,
    pub rewards: Vec<Reward>,
    pub advantages: Vec<f64>,
}

impl RolloutGroup {
    pub fn group_size(&self) -> usize {
        self.responses.len()
    }

    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().map(|r| r.as_f64()).sum::<f64>() / self.rewards.len() as f64
    }

    /// All rewards equal: zero advantages, no-op generator update.
    pub fn is_flat(&self) -> bool {
        self.rewards.windows(2).all(|w| w[0] == w[1])
    }
}

/// Draws `group_size` independent samples, scores each with the containment
/// reward against the query's gold answers, and attaches group-relative
/// advantages.
#[allow(clippy::too_many_arguments)]
pub fn rollout_group(
    policy: &GeneratorPolicy,
    query: &Query,
    selected: &SelectedSet,
    corpus: &Corpus,
    cfg: &CandidateConfig,
    group_size: usize,
    norm: AdvantageNorm,
    rng: &mut SeededRng,
) -> Result<RolloutGroup> {
    assert!(group_size >= 2, "rollout_group: group_size must be >= 2");
    let candidates = build_candidates(query, selected, corpus, cfg, &policy.feature_map)?;
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let probs = candidate_distribution(policy, &candidates);

    let responses: Vec<GeneratedAnswer> = (0..group_size)
        .map(|_| sample_one(&candidates, &probs, rng))
        .collect();
    let rewards: Vec<Reward> = responses
        .iter()
        .map(|r| containment_reward(&query.gold_answers, &r.text))
        .collect();
    let reward_values: Vec<f64> = rewards.iter().map(|r| r.as_f64()).collect();
    let advantages = compute_advantages(&reward_values, norm);

    debug_assert!(advantages.iter().sum::<f64>().abs() < 1e-9);
    Ok(RolloutGroup {
        query_id: query.id.clone(),
        selected: selected.clone(),
        responses,
        rewards,
        advantages,
    })
}

/// GRPO policy-gradient loss for the generator:
/// `-(1/G) * sum_i A_i * log pi(a_i | q, D)`, with the analytic gradient
/// through the softmax-over-candidates policy.
pub fn grpo_generator_loss(
    policy: &GeneratorPolicy,
    group: &RolloutGroup,
    query: &Query,
    corpus: &Corpus,
    cfg: &CandidateConfig,
) -> Result<LossAndGrad> {
    let candidates = build_candidates(query, &group.selected, corpus, cfg, &policy.feature_map)?;
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let probs = candidate_distribution(policy, &candidates);

    // Probability-weighted mean feature vector.
    let mut mean_features = [0.0; GENERATOR_FEATURE_DIM];
    for (p, c) in probs.iter().zip(&candidates) {
        for (m, f) in mean_features.iter_mut().zip(&c.features) {
            *m += p * f;
        }
    }

    let group_size = group.group_size() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.phi.len()];
    for (response, advantage) in group.responses.iter().zip(&group.advantages) {
        let idx = response.candidate_index;
        assert!(
            idx < candidates.len(),
            "grpo_generator_loss: response index out of range"
        );
        loss -= advantage * probs[idx].ln() / group_size;
        let scale = -advantage / (policy.tau * group_size);
        for ((g, f), m) in grad
            .iter_mut()
            .zip(&candidates[idx].features)
            .zip(&mean_features)
        {
            *g += scale * (f - m);
        }
    }
    Ok(LossAndGrad { loss, grad })
}

/// One gradient-descent step: `phi <- phi - learning_rate * gradient`.
/// Non-finite gradients abort the step.
pub fn update_generator(
    policy: &GeneratorPolicy,
    gradient: &[f64],
    learning_rate: f64,
) -> Result<GeneratorPolicy> {
    assert_eq!(
        gradient.len(),
        policy.phi.len(),
        "update_generator: gradient dimension mismatch"
    );
    if !all_finite(gradient) {
        return Err(Error::NonFiniteGradient { agent: "generator" });
    }
    let mut updated = policy.clone();
    for (p, g) in updated.phi.iter_mut().zip(gradient) {
        *p -= learning_rate * g;
    }
    Ok(updated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::DocId;
    use crate::reranker::{rank_and_select, RerankerPolicy};
    use proptest::prelude::*;
    use std::collections::BTreeSet as Set;

    fn world(doc_texts: &[&str], query_text: &str, golds: &[&str]) -> (Query, Corpus, SelectedSet) {
        let mut corpus = Corpus::new();
        let mut ids = Vec::new();
        for (i, text) in doc_texts.iter().enumerate() {
            let id = DocId::from(format!("d{i}").as_str());
            corpus
                .insert(Document::new(id.clone(), text, Set::new()).unwrap())
                .unwrap();
            ids.push(id);
        }
        let query = Query::new(
            "q".into(),
            query_text,
            golds.iter().map(|g| g.to_string()).collect(),
            ids,
        )
        .unwrap();
        let selected =
            rank_and_select(&RerankerPolicy::zeros(), &query, &corpus, doc_texts.len()).unwrap();
        (query, corpus, selected)
    }

    fn texts(candidates: &[AnswerCandidate]) -> Vec<&str> {
        candidates.iter().map(|c| c.text.as_str()).collect()
    }

    #[test]
    fn single_token_doc_yields_single_candidate() {
        let (query, corpus, selected) = world(&["paris"], "capital", &["paris"]);
        let cfg = CandidateConfig { max_ngram: 1, cap: 256 };
        let cands = build_candidates(&query, &selected, &corpus, &cfg, &CandidateFeatureMap::default()).unwrap();
        assert_eq!(texts(&cands), vec!["paris"]);
    }

    #[test]
    fn enumerates_unigrams_then_bigrams() {
        let (query, corpus, selected) = world(&["paris france"], "capital", &["paris"]);
        let cfg = CandidateConfig { max_ngram: 2, cap: 256 };
        let cands = build_candidates(&query, &selected, &corpus, &cfg, &CandidateFeatureMap::default()).unwrap();
        assert_eq!(texts(&cands), vec!["paris", "france", "paris france"]);
    }

    #[test]
    fn candidates_match_exhaustive_enumeration_oracle() {
        let (query, corpus, selected) = world(
            &[
                "alpha beta gamma delta epsilon zeta eta theta iota kappa",
                "kappa beta lambda mu nu xi omicron pi rho sigma",
            ],
            "beta mu",
            &["sigma"],
        );
        let cfg = CandidateConfig { max_ngram: 2, cap: 10_000 };
        let got: Set<String> = build_candidates(&query, &selected, &corpus, &cfg, &CandidateFeatureMap::default())
            .unwrap()
            .into_iter()
            .map(|c| c.text)
            .collect();

        // Independent set-based enumeration of every 1- and 2-gram.
        let mut expected: Set<String> = Set::new();
        for id in selected.doc_ids() {
            let tokens = &corpus.get(id).unwrap().text;
            for n in 1..=2usize {
                for w in tokens.windows(n) {
                    expected.insert(w.join(" "));
                }
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn cap_truncates_deterministically() {
        let (query, corpus, selected) = world(
            &["a b c d e f g h i j"],
            "irrelevant",
            &["a"],
        );
        let cfg = CandidateConfig { max_ngram: 2, cap: 4 };
        let cands = build_candidates(&query, &selected, &corpus, &cfg, &CandidateFeatureMap::default()).unwrap();
        assert_eq!(texts(&cands), vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn build_candidates_features_match_reference_map() {
        // build_candidates accumulates occurrence statistics in one pass;
        // the per-candidate map is the reference definition.
        let (query, corpus, selected) = world(
            &[
                "alpha beta alpha gamma beta delta",
                "beta beta epsilon alpha zeta eta",
                "theta iota alpha kappa beta beta",
            ],
            "alpha epsilon kappa",
            &["delta"],
        );
        let cfg = CandidateConfig { max_ngram: 3, cap: 10_000 };
        let map = CandidateFeatureMap::default();
        let docs: Vec<&Document> = selected
            .doc_ids()
            .map(|id| corpus.get(id).unwrap())
            .collect();
        for cand in build_candidates(&query, &selected, &corpus, &cfg, &map).unwrap() {
            let tokens: Vec<String> = cand.text.split(' ').map(str::to_owned).collect();
            assert_eq!(
                cand.features,
                map.features(&query, &docs, &tokens),
                "candidate {:?}",
                cand.text
            );
        }
    }

    #[test]
    fn weighted_occurrence_feature_decays_with_rank() {
        // "kappa" appears once in the rank-1 doc and once in the rank-2
        // doc: weighted count 1/1 + 1/2.
        let (query, corpus, _) = world(
            &["kappa alpha", "kappa beta"],
            "unrelated",
            &["alpha"],
        );
        let selected =
            rank_and_select(&RerankerPolicy::zeros(), &query, &corpus, 2).unwrap();
        let cfg = CandidateConfig { max_ngram: 1, cap: 256 };
        let cands = build_candidates(&query, &selected, &corpus, &cfg, &CandidateFeatureMap::default()).unwrap();
        let kappa = cands.iter().find(|c| c.text == "kappa").unwrap();
        assert_eq!(kappa.features[0], 1.0 + 0.5);
        assert_eq!(kappa.features[1], 1.0);
        let beta = cands.iter().find(|c| c.text == "beta").unwrap();
        assert_eq!(beta.features[0], 0.5);
        assert_eq!(beta.features[1], 0.0);
    }

    #[test]
    fn single_candidate_generates_with_log_prob_zero() {
        let (query, corpus, selected) = world(&["paris"], "capital", &["paris"]);
        let cfg = CandidateConfig { max_ngram: 1, cap: 256 };
        let mut rng = SeededRng::derive(3, "gen");
        let out = generate(
            &GeneratorPolicy::zeros(0.7),
            &query,
            &selected,
            &corpus,
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.text, "paris");
        assert_eq!(out.log_prob, 0.0);
    }

    #[test]
    fn symmetric_candidates_sample_evenly() {
        // Two tokens with identical features (same doc, same length, no
        // query overlap): each should appear about half the time.
        let (query, corpus, selected) = world(&["paris london"], "unrelated", &["paris"]);
        let cfg = CandidateConfig { max_ngram: 1, cap: 256 };
        let policy = GeneratorPolicy::with_phi(vec![0.4, -0.2, 0.3, 0.1, 0.0], 0.7);
        let mut rng = SeededRng::derive(11, "sym");
        let draws = 10_000;
        let mut first = 0usize;
        for _ in 0..draws {
            let out = generate(&policy, &query, &selected, &corpus, &cfg, &mut rng).unwrap();
            if out.text == "paris" {
                first += 1;
            }
        }
        let freq = first as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn high_temperature_approaches_uniform() {
        let (query, corpus, selected) = world(
            &["alpha beta gamma delta"],
            "alpha beta",
            &["gamma"],
        );
        let cfg = CandidateConfig { max_ngram: 1, cap: 256 };
        let policy = GeneratorPolicy::with_phi(vec![1.0, 0.5, -0.3, 0.8, 0.0], 1000.0);
        let cands = build_candidates(&query, &selected, &corpus, &cfg, &CandidateFeatureMap::default()).unwrap();
        let mut rng = SeededRng::derive(13, "hot");
        let draws = 10_000;
        let mut counts = vec![0usize; cands.len()];
        for _ in 0..draws {
            let out = generate(&policy, &query, &selected, &corpus, &cfg, &mut rng).unwrap();
            counts[out.candidate_index] += 1;
        }
        let uniform = 1.0 / cands.len() as f64;
        let tv: f64 = counts
            .iter()
            .map(|c| (*c as f64 / draws as f64 - uniform).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn advantages_match_hand_computed_cases() {
        let close = |got: &[f64], want: &[f64]| {
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-6, "{got:?} vs {want:?}");
            }
        };
        close(
            &compute_advantages(&[1.0, 1.0, 1.0], AdvantageNorm::MeanStd),
            &[0.0, 0.0, 0.0],
        );
        close(
            &compute_advantages(&[1.0, 0.0], AdvantageNorm::MeanStd),
            &[1.0, -1.0],
        );
        close(
            &compute_advantages(&[1.0, 0.0, 0.0, 1.0], AdvantageNorm::MeanStd),
            &[1.0, -1.0, -1.0, 1.0],
        );
        // mean 0.25, population std sqrt(3)/4.
        let s3 = 3.0f64.sqrt();
        close(
            &compute_advantages(&[1.0, 0.0, 0.0, 0.0], AdvantageNorm::MeanStd),
            &[s3, -1.0 / s3, -1.0 / s3, -1.0 / s3],
        );
    }

    #[test]
    fn zero_variance_group_has_exactly_zero_advantages() {
        for adv in compute_advantages(&[1.0, 1.0, 1.0, 1.0], AdvantageNorm::MeanStd) {
            assert_eq!(adv, 0.0);
        }
    }

    #[test]
    #[should_panic(expected = "at least two")]
    fn single_reward_group_panics() {
        compute_advantages(&[1.0], AdvantageNorm::MeanStd);
    }

    #[test]
    fn rollout_group_is_reproducible_and_flat_aware() {
        let (query, corpus, selected) = world(
            &["alpha beta answer gamma"],
            "alpha beta",
            &["answer"],
        );
        let cfg = CandidateConfig::default();
        let policy = GeneratorPolicy::zeros(0.7);
        let run = |seed: u64| {
            let mut rng = SeededRng::derive(seed, "rollout");
            rollout_group(
                &policy, &query, &selected, &corpus, &cfg, 8,
                AdvantageNorm::MeanStd, &mut rng,
            )
            .unwrap()
        };
        let a = run(21);
        let b = run(21);
        assert_eq!(a, b);
        assert_eq!(a.group_size(), 8);
        assert!(a.advantages.iter().sum::<f64>().abs() < 1e-9);
        if a.is_flat() {
            assert!(a.advantages.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn flat_group_loss_and_gradient_are_zero() {
        let (query, corpus, selected) = world(&["alpha beta"], "alpha", &["nothere"]);
        let cfg = CandidateConfig::default();
        let policy = GeneratorPolicy::zeros(0.7);
        let mut rng = SeededRng::derive(2, "flat");
        // No candidate contains the gold answer: rewards all zero.
        let group = rollout_group(
            &policy, &query, &selected, &corpus, &cfg, 4,
            AdvantageNorm::MeanStd, &mut rng,
        )
        .unwrap();
        assert!(group.is_flat());
        let out = grpo_generator_loss(&policy, &group, &query, &corpus, &cfg).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad.iter().all(|g| *g == 0.0));
    }

    fn non_flat_group(
        policy: &GeneratorPolicy,
    ) -> (Query, Corpus, CandidateConfig, RolloutGroup) {
        let (query, corpus, selected) = world(
            &["noise answer noise other answer filler"],
            "noise question",
            &["answer"],
        );
        let cfg = CandidateConfig::default();
        let mut seed = 0u64;
        loop {
            let mut rng = SeededRng::derive(seed, "nonflat");
            let group = rollout_group(
                policy, &query, &selected, &corpus, &cfg, 8,
                AdvantageNorm::MeanStd, &mut rng,
            )
            .unwrap();
            if !group.is_flat() {
                return (query, corpus, cfg, group);
            }
            seed += 1;
        }
    }

    #[test]
    fn generator_update_descends_and_raises_rewarded_probability() {
        let policy = GeneratorPolicy::zeros(0.7);
        let (query, corpus, cfg, group) = non_flat_group(&policy);
        let out = grpo_generator_loss(&policy, &group, &query, &corpus, &cfg).unwrap();
        assert!(out.grad.iter().any(|g| *g != 0.0));

        let updated = update_generator(&policy, &out.grad, 1e-4).unwrap();
        let after = grpo_generator_loss(&updated, &group, &query, &corpus, &cfg).unwrap();
        assert!(after.loss < out.loss, "{} !< {}", after.loss, out.loss);

        // The probability of a positively-advantaged sampled answer rises.
        let cands = build_candidates(&query, &group.selected, &corpus, &cfg, &CandidateFeatureMap::default()).unwrap();
        let probs_before = candidate_distribution(&policy, &cands);
        let probs_after = candidate_distribution(&updated, &cands);
        let (idx, _) = group
            .responses
            .iter()
            .zip(&group.advantages)
            .find(|(_, a)| **a > 0.0)
            .map(|(r, a)| (r.candidate_index, a))
            .expect("non-flat group has a positive advantage");
        assert!(probs_after[idx] > probs_before[idx]);
    }

    #[test]
    fn generator_gradient_matches_finite_differences() {
        let mut rng = SeededRng::derive(31, "gen-fd");
        for trial in 0..20 {
            let phi: Vec<f64> = (0..GENERATOR_FEATURE_DIM)
                .map(|_| rng.next_f64() * 2.0 - 1.0)
                .collect();
            let tau = 0.5 + rng.next_f64();
            let policy = GeneratorPolicy::with_phi(phi, tau);
            let (query, corpus, cfg, group) = non_flat_group(&policy);
            let analytic = grpo_generator_loss(&policy, &group, &query, &corpus, &cfg)
                .unwrap()
                .grad;

            let step = 1e-6;
            let fd: Vec<f64> = (0..GENERATOR_FEATURE_DIM)
                .map(|j| {
                    let mut plus = policy.clone();
                    plus.phi[j] += step;
                    let mut minus = policy.clone();
                    minus.phi[j] -= step;
                    let lp = grpo_generator_loss(&plus, &group, &query, &corpus, &cfg)
                        .unwrap()
                        .loss;
                    let lm = grpo_generator_loss(&minus, &group, &query, &corpus, &cfg)
                        .unwrap()
                        .loss;
                    (lp - lm) / (2.0 * step)
                })
                .collect();

            let diff: f64 = analytic
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let norm = analytic
                .iter()
                .map(|a| a * a)
                .sum::<f64>()
                .sqrt()
                .max(1e-8);
            assert!(diff / norm < 1e-5, "trial {trial}: rel err {}", diff / norm);
        }
    }

    #[test]
    fn update_identities() {
        let policy = GeneratorPolicy::with_phi(vec![0.1, 0.2, 0.3, 0.4, 0.5], 0.7);
        let zero = vec![0.0; GENERATOR_FEATURE_DIM];
        assert_eq!(update_generator(&policy, &zero, 0.5).unwrap(), policy);
        let grad = vec![1.0; GENERATOR_FEATURE_DIM];
        assert_eq!(update_generator(&policy, &grad, 0.0).unwrap(), policy);
        let mut bad = zero.clone();
        bad[0] = f64::INFINITY;
        assert!(update_generator(&policy, &bad, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one(
            phi in proptest::collection::vec(-3.0f64..3.0, GENERATOR_FEATURE_DIM),
            tau in 0.05f64..10.0
        ) {
            let (query, corpus, selected) = world(
                &["alpha beta gamma delta epsilon"],
                "alpha gamma",
                &["beta"],
            );
            let cfg = CandidateConfig::default();
            let cands = build_candidates(&query, &selected, &corpus, &cfg, &CandidateFeatureMap::default()).unwrap();
            let probs = candidate_distribution(&GeneratorPolicy::with_phi(phi, tau), &cands);
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn advantages_sum_to_zero_and_shift_invariant(
            rewards in proptest::collection::vec(-5.0f64..5.0, 2..12),
            shift in -10.0f64..10.0
        ) {
            for norm in [AdvantageNorm::Mean, AdvantageNorm::MeanStd] {
                let adv = compute_advantages(&rewards, norm);
                prop_assert!(adv.iter().sum::<f64>().abs() < 1e-9);
                let shifted: Vec<f64> = rewards.iter().map(|r| r + shift).collect();
                let adv_shifted = compute_advantages(&shifted, norm);
                for (a, b) in adv.iter().zip(&adv_shifted) {
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn argmax_probability_non_increasing_in_temperature(
            base_tau in 0.1f64..5.0,
            factor in 1.01f64..10.0
        ) {
            let (query, corpus, selected) = world(
                &["alpha beta gamma delta"],
                "alpha",
                &["beta"],
            );
            let cfg = CandidateConfig { max_ngram: 1, cap: 256 };
            let phi = vec![1.5, 0.3, -0.2, 0.9, 0.0];
            let cands = build_candidates(&query, &selected, &corpus, &cfg, &CandidateFeatureMap::default()).unwrap();

            let cold = candidate_distribution(
                &GeneratorPolicy::with_phi(phi.clone(), base_tau), &cands,
            );
            let hot = candidate_distribution(
                &GeneratorPolicy::with_phi(phi, base_tau * factor), &cands,
            );
            let argmax = cold
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            prop_assert!(hot[argmax] <= cold[argmax] + 1e-12);
        }
    }
}
