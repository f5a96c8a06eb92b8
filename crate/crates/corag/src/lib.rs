//! Cooperative optimization of a reranker and a generator against a shared
//! task reward, with toy differentiable policies and a synthetic retrieval
//! environment.
//!
//! The two agents are peers rather than a fixed pipeline: the reranker
//! selects documents, the generator answers from them, and a single binary
//! containment reward drives both updates. A per-document success ledger
//! converts the delayed task reward into stochastic preference labels for
//! ranking, while the generator trains with group-relative policy gradients.
//!
//! Everything is deterministic given a seed, so training dynamics are
//! reproducible and property-testable end to end.

pub mod cli;
pub mod core;
pub mod credit;
pub mod error;
pub mod generator;
mod numeric;
pub mod reranker;
pub mod reward;
pub mod synthenv;
pub mod trainer;

pub use error::{Error, Result};
