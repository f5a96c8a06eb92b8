//! Domain types, text normalization, and deterministic seeded randomness.

pub mod io;
pub mod rng;
pub mod text;
mod types;

pub use rng::SeededRng;
pub use text::{contains_subsequence, normalize_text};
pub use types::{Corpus, DocId, Document, Query, QueryId};
