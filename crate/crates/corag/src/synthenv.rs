//! Synthetic task generation with known gold documents and answers.
//!
//! Every query gets a fixed number of gold documents that contain one of its
//! answers verbatim, plus distractors that leak a controlled fraction of the
//! query's tokens but never contain an answer. Gold markers make oracle
//! metrics (hit@k) checkable against ground truth, and the leaked tokens
//! keep purely lexical ranking from being trivial.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::core::{Corpus, DocId, Document, Query, QueryId, SeededRng};
use crate::error::{Error, Result};
use crate::reranker::SelectedSet;

/// Tokens per query; fixed so specs stay small.
pub const QUERY_LEN: usize = 6;

/// Occurrences of the answer n-gram planted in each gold document. Repeated
/// mentions give the generator's occurrence feature a margin over filler
/// tokens (which appear once) and over query tokens leaked into several
/// selected distractors at once, even with five documents in context.
pub const ANSWER_OCCURRENCES: usize = 4;

/// Parameters of a generated retrieval task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_queries: usize,
    pub candidates_per_query: usize,
    pub gold_docs_per_query: usize,
    /// Fraction of query tokens leaked into each distractor.
    pub distractor_overlap: f64,
    pub vocab_size: usize,
    pub doc_length: usize,
    pub answer_ngram_len: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// The reference task used by the regression experiments.
    fn default() -> Self {
        SynthSpec {
            num_queries: 200,
            candidates_per_query: 10,
            gold_docs_per_query: 1,
            distractor_overlap: 0.4,
            vocab_size: 500,
            doc_length: 20,
            answer_ngram_len: 1,
            seed: 42,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSynthSpec(msg));
        if self.num_queries == 0
            || self.candidates_per_query == 0
            || self.gold_docs_per_query == 0
            || self.vocab_size == 0
            || self.doc_length == 0
            || self.answer_ngram_len == 0
        {
            return fail("all counts must be positive".into());
        }
        if self.gold_docs_per_query > self.candidates_per_query {
            return fail(format!(
                "gold_docs_per_query {} exceeds candidates_per_query {}",
                self.gold_docs_per_query, self.candidates_per_query
            ));
        }
        if !(0.0..=1.0).contains(&self.distractor_overlap) {
            return fail(format!(
                "distractor_overlap {} outside [0, 1]",
                self.distractor_overlap
            ));
        }
        if self.doc_length < QUERY_LEN + ANSWER_OCCURRENCES * self.answer_ngram_len {
            return fail(format!(
                "doc_length {} too short: gold documents need at least {} tokens \
                 ({} query tokens plus {} answer occurrences of {} tokens)",
                self.doc_length,
                QUERY_LEN + ANSWER_OCCURRENCES * self.answer_ngram_len,
                QUERY_LEN,
                ANSWER_OCCURRENCES,
                self.answer_ngram_len
            ));
        }
        let answer_words = self.num_queries * self.answer_ngram_len;
        let filler_needed = QUERY_LEN + self.doc_length;
        if self.vocab_size < answer_words + filler_needed {
            return fail(format!(
                "vocabulary too small to guarantee answer uniqueness: \
                 {} queries with {}-token answers reserve {} words and documents \
                 need {} filler words, but vocab_size is {}",
                self.num_queries,
                self.answer_ngram_len,
                answer_words,
                filler_needed,
                self.vocab_size
            ));
        }
        Ok(())
    }
}

fn word(i: usize) -> String {
    format!("w{i:04}")
}

/// Generates the corpus and query set described by `spec`. Fully determined
/// by `spec.seed`.
pub fn generate_task(spec: &SynthSpec) -> Result<(Corpus, Vec<Query>)> {
    spec.validate()?;
    let mut rng = SeededRng::derive(spec.seed, "synthenv");

    // The vocabulary head is filler; the tail is reserved so each query's
    // answer tokens are globally unique and can never appear in filler.
    let filler_size = spec.vocab_size - spec.num_queries * spec.answer_ngram_len;

    let mut corpus = Corpus::new();
    let mut queries = Vec::with_capacity(spec.num_queries);

    for j in 0..spec.num_queries {
        let query_id = QueryId(format!("q{j:04}"));
        let query_word_idx = rng.sample_distinct(filler_size, QUERY_LEN);
        let query_words: Vec<String> = query_word_idx.iter().map(|&i| word(i)).collect();
        let query_set: BTreeSet<usize> = query_word_idx.iter().copied().collect();
        let non_query_filler: Vec<usize> =
            (0..filler_size).filter(|i| !query_set.contains(i)).collect();

        let answer_base = filler_size + j * spec.answer_ngram_len;
        let answer_tokens: Vec<String> = (0..spec.answer_ngram_len)
            .map(|k| word(answer_base + k))
            .collect();
        let answer = answer_tokens.join(" ");

        let gold_slots: BTreeSet<usize> = rng
            .sample_distinct(spec.candidates_per_query, spec.gold_docs_per_query)
            .into_iter()
            .collect();

        let mut candidate_ids = Vec::with_capacity(spec.candidates_per_query);
        for slot in 0..spec.candidates_per_query {
            let doc_id = DocId(format!("d{j:04}x{slot:02}"));
            let tokens = if gold_slots.contains(&slot) {
                gold_document(spec, &mut rng, &query_words, &answer_tokens, &non_query_filler)
            } else {
                distractor_document(spec, &mut rng, &query_words, &non_query_filler)
            };
            let gold_for: BTreeSet<QueryId> = if gold_slots.contains(&slot) {
                [query_id.clone()].into()
            } else {
                BTreeSet::new()
            };
            corpus.insert(Document::new(doc_id.clone(), &tokens.join(" "), gold_for)?)?;
            candidate_ids.push(doc_id);
        }

        queries.push(Query::new(
            query_id,
            &query_words.join(" "),
            vec![answer],
            candidate_ids,
        )?);
    }
    Ok((corpus, queries))
}

/// Gold document: every query token once, the answer n-gram planted
/// `ANSWER_OCCURRENCES` times as contiguous blocks, rest distinct filler.
fn gold_document(
    spec: &SynthSpec,
    rng: &mut SeededRng,
    query_words: &[String],
    answer_tokens: &[String],
    non_query_filler: &[usize],
) -> Vec<String> {
    let filler_count = spec.doc_length - QUERY_LEN - ANSWER_OCCURRENCES * spec.answer_ngram_len;
    let mut units: Vec<Vec<String>> = Vec::new();
    for w in query_words {
        units.push(vec![w.clone()]);
    }
    for _ in 0..ANSWER_OCCURRENCES {
        units.push(answer_tokens.to_vec());
    }
    for idx in rng.sample_distinct(non_query_filler.len(), filler_count) {
        units.push(vec![word(non_query_filler[idx])]);
    }
    rng.shuffle(&mut units);
    units.into_iter().flatten().collect()
}

/// Distractor: a query-token leak at the configured rate (each leaked token
/// repeated once or twice, so overlap counts can rival the gold document's),
/// padded with distinct filler. Never contains answer tokens, which live
/// outside the filler vocabulary.
fn distractor_document(
    spec: &SynthSpec,
    rng: &mut SeededRng,
    query_words: &[String],
    non_query_filler: &[usize],
) -> Vec<String> {
    let target = spec.distractor_overlap * QUERY_LEN as f64;
    let mut leak_count = target.floor() as usize;
    if rng.bernoulli(target - target.floor()) {
        leak_count += 1;
    }
    leak_count = leak_count.min(QUERY_LEN);

    let mut units: Vec<Vec<String>> = Vec::new();
    let mut used = 0usize;
    for idx in rng.sample_distinct(QUERY_LEN, leak_count) {
        let copies = (1 + rng.index(2)).min(spec.doc_length - used);
        for _ in 0..copies {
            units.push(vec![query_words[idx].clone()]);
        }
        used += copies;
    }
    let filler_count = spec.doc_length - used;
    for idx in rng.sample_distinct(non_query_filler.len(), filler_count) {
        units.push(vec![word(non_query_filler[idx])]);
    }
    rng.shuffle(&mut units);
    units.into_iter().flatten().collect()
}

/// True iff any selected document is marked gold for `query`.
pub fn oracle_hit_at_k(selected: &SelectedSet, query: &Query, corpus: &Corpus) -> bool {
    selected.doc_ids().any(|id| {
        corpus
            .get(id)
            .map(|d| d.gold_for.contains(&query.id))
            .unwrap_or(false)
    })
}
