//! The retrieval universe: queries, documents, and the corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::core::text::normalize_text;
use crate::error::{Error, Result};

/// Opaque document identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(pub String);

/// Opaque query identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub String);

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(s: &str) -> Self {
        DocId(s.to_owned())
    }
}

impl From<&str> for QueryId {
    fn from(s: &str) -> Self {
        QueryId(s.to_owned())
    }
}

/// A question with its ground-truth answers and candidate document pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: QueryId,
    /// Normalized token sequence.
    pub text: Vec<String>,
    /// Ground-truth answer strings; any one of them counts as correct.
    pub gold_answers: Vec<String>,
    /// The candidate set this query is ranked against, in stable order.
    pub candidate_doc_ids: Vec<DocId>,
}

impl Query {
    /// Builds a query from raw text, enforcing the type invariants:
    /// non-empty gold answers and duplicate-free, non-empty candidates.
    pub fn new(
        id: QueryId,
        raw_text: &str,
        gold_answers: Vec<String>,
        candidate_doc_ids: Vec<DocId>,
    ) -> Result<Self> {
        if gold_answers.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "query {id}: gold_answers must be non-empty"
            )));
        }
        if candidate_doc_ids.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "query {id}: candidate_doc_ids must be non-empty"
            )));
        }
        let mut seen = BTreeSet::new();
        for d in &candidate_doc_ids {
            if !seen.insert(d) {
                return Err(Error::InvalidConfig(format!(
                    "query {id}: duplicate candidate doc id {d}"
                )));
            }
        }
        Ok(Query {
            id,
            text: normalize_text(raw_text),
            gold_answers,
            candidate_doc_ids,
        })
    }
}

/// A passage. `gold_for` marks which queries this document answers; it is an
/// oracle annotation of the synthetic environment and must never be read by
/// policy feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: DocId,
    /// Normalized token sequence; never empty.
    pub text: Vec<String>,
    pub gold_for: BTreeSet<QueryId>,
}

impl Document {
    pub fn new(id: DocId, raw_text: &str, gold_for: BTreeSet<QueryId>) -> Result<Self> {
        let text = normalize_text(raw_text);
        if text.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "document {id}: text must contain at least one token"
            )));
        }
        Ok(Document { id, text, gold_for })
    }
}

/// Id-keyed document collection with deterministic iteration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    documents: BTreeMap<DocId, Document>,
}

impl Corpus {
    pub fn new() -> Self {
        Corpus::default()
    }

    pub fn insert(&mut self, doc: Document) -> Result<()> {
        if self.documents.contains_key(&doc.id) {
            return Err(Error::InvalidConfig(format!(
                "duplicate document id {}",
                doc.id
            )));
        }
        self.documents.insert(doc.id.clone(), doc);
        Ok(())
    }

    pub fn get(&self, id: &DocId) -> Result<&Document> {
        self.documents
            .get(id)
            .ok_or_else(|| Error::DocNotFound { id: id.clone() })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_rejects_empty_gold_answers() {
        let err = Query::new("q1".into(), "who", vec![], vec!["d1".into()]);
        assert!(err.is_err());
    }

    #[test]
    fn query_rejects_duplicate_candidates() {
        let err = Query::new(
            "q1".into(),
            "who",
            vec!["a".into()],
            vec!["d1".into(), "d1".into()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn query_normalizes_text() {
        let q = Query::new(
            "q1".into(),
            "Who wrote 'The Mahdi'?",
            vec!["A.J. Quinnell".into()],
            vec!["d1".into()],
        )
        .unwrap();
        assert_eq!(q.text, vec!["who", "wrote", "the", "mahdi"]);
    }

    #[test]
    fn document_rejects_empty_text() {
        assert!(Document::new("d1".into(), " .,! ", BTreeSet::new()).is_err());
    }

    #[test]
    fn corpus_lookup_reports_missing_id() {
        let corpus = Corpus::new();
        let err = corpus.get(&"ghost".into()).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let mut corpus = Corpus::new();
        corpus
            .insert(Document::new("d1".into(), "alpha", BTreeSet::new()).unwrap())
            .unwrap();
        let dup = Document::new("d1".into(), "beta", BTreeSet::new()).unwrap();
        assert!(corpus.insert(dup).is_err());
    }
}
