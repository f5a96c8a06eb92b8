//! The shared task-oriented reward that couples both agents.

use crate::core::{contains_subsequence, normalize_text};

/// Binary task reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reward(bool);

impl Reward {
    pub const SUCCESS: Reward = Reward(true);
    pub const FAILURE: Reward = Reward(false);

    pub fn is_success(self) -> bool {
        self.0
    }

    pub fn value(self) -> u64 {
        self.0 as u64
    }

    pub fn as_f64(self) -> f64 {
        self.0 as u8 as f64
    }
}

/// Returns success iff the generated response contains at least one gold
/// answer as a contiguous token run after normalization.
///
/// Matching is disjunctive over `gold_answers`: any single match suffices.
/// A gold answer that normalizes to no tokens never matches. An empty
/// `gold_answers` list is a contract violation and panics.
pub fn containment_reward(gold_answers: &[String], generated: &str) -> Reward {
    assert!(
        !gold_answers.is_empty(),
        "containment_reward: empty gold_answers"
    );
    let generated = normalize_text(generated);
    for gold in gold_answers {
        let needle = normalize_text(gold);
        if needle.is_empty() {
            continue;
        }
        if !generated.is_empty() && contains_subsequence(&generated, &needle) {
            return Reward::SUCCESS;
        }
    }
    Reward::FAILURE
}
