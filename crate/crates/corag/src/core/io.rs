//! Line-delimited corpus and dataset files.
//!
//! One JSON record per line. Document records carry `id`, `text`, and an
//! optional `gold_for` list; query records carry `id`, `text`,
//! `gold_answers`, and `candidate_doc_ids`. Text is stored as a plain string
//! and normalized into tokens on load.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::types::{Corpus, DocId, Document, Query, QueryId};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    id: DocId,
    text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    gold_for: Vec<QueryId>,
}

#[derive(Serialize, Deserialize)]
struct QueryRecord {
    id: QueryId,
    text: String,
    gold_answers: Vec<String>,
    candidate_doc_ids: Vec<DocId>,
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| Error::io(format!("creating corpus file {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    for doc in corpus.iter() {
        let record = DocumentRecord {
            id: doc.id.clone(),
            text: doc.text.join(" "),
            gold_for: doc.gold_for.iter().cloned().collect(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::json(format!("encoding document {}", doc.id), e))?;
        writeln!(out, "{line}")
            .map_err(|e| Error::io(format!("writing corpus file {}", path.display()), e))?;
    }
    out.flush()
        .map_err(|e| Error::io(format!("writing corpus file {}", path.display()), e))
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path)
        .map_err(|e| Error::io(format!("opening corpus file {}", path.display()), e))?;
    let mut corpus = Corpus::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("{}:{}", path.display(), lineno + 1), e))?;
        let gold_for: BTreeSet<QueryId> = record.gold_for.into_iter().collect();
        corpus.insert(Document::new(record.id, &record.text, gold_for)?)?;
    }
    Ok(corpus)
}

pub fn write_dataset(queries: &[Query], path: &Path) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| Error::io(format!("creating dataset file {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    for q in queries {
        let record = QueryRecord {
            id: q.id.clone(),
            text: q.text.join(" "),
            gold_answers: q.gold_answers.clone(),
            candidate_doc_ids: q.candidate_doc_ids.clone(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::json(format!("encoding query {}", q.id), e))?;
        writeln!(out, "{line}")
            .map_err(|e| Error::io(format!("writing dataset file {}", path.display()), e))?;
    }
    out.flush()
        .map_err(|e| Error::io(format!("writing dataset file {}", path.display()), e))
}

pub fn read_dataset(path: &Path) -> Result<Vec<Query>> {
    let file = File::open(path)
        .map_err(|e| Error::io(format!("opening dataset file {}", path.display()), e))?;
    let mut queries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: QueryRecord = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("{}:{}", path.display(), lineno + 1), e))?;
        queries.push(Query::new(
            record.id,
            &record.text,
            record.gold_answers,
            record.candidate_doc_ids,
        )?);
    }
    Ok(queries)
}
