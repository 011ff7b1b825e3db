//! Generation-stage stand-ins and correctness scorers for end-to-end runs.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::QueryRecord;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::scorers::ScoreTable;

/// A retrieved entry handed to the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextItem {
    pub entry_id: String,
    pub payload_ref: String,
    pub rs: f64,
}

/// Produces a response from a query and its retrieved context.
pub trait Responder: Send + Sync {
    fn label(&self) -> &str;
    fn respond(&self, query: &QueryRecord<f64>, context: &[ContextItem]) -> Result<String>;
}

/// Returns the context payloads, one per line.
#[derive(Debug, Clone, Default)]
pub struct EchoResponder;

impl Responder for EchoResponder {
    fn label(&self) -> &str {
        "echo"
    }

    fn respond(&self, _query: &QueryRecord<f64>, context: &[ContextItem]) -> Result<String> {
        Ok(context
            .iter()
            .map(|c| c.payload_ref.as_str())
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub query_id: String,
    pub response: String,
}

/// Looks responses up by query id.
#[derive(Debug, Clone)]
pub struct TableResponder {
    responses: HashMap<String, String>,
}

impl TableResponder {
    pub fn new(responses: HashMap<String, String>) -> Self {
        Self { responses }
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let records = jsonl::read_records::<ResponseRecord>(reader)?;
        Ok(Self::new(
            records
                .into_iter()
                .map(|(_, r)| (r.query_id, r.response))
                .collect(),
        ))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

impl Responder for TableResponder {
    fn label(&self) -> &str {
        "table"
    }

    fn respond(&self, query: &QueryRecord<f64>, _context: &[ContextItem]) -> Result<String> {
        self.responses
            .get(&query.query_id)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("no response for query {}", query.query_id)))
    }
}

/// Correctness of a response in view of its context, in `[0, 1]`.
pub trait CorrectnessScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, query: &QueryRecord<f64>, response: &str, context: &[ContextItem])
        -> Result<f64>;
}

/// Treats any response backed by a non-empty context as fully correct.
#[derive(Debug, Clone, Default)]
pub struct GroundedCorrectness;

impl CorrectnessScorer for GroundedCorrectness {
    fn name(&self) -> &str {
        "grounded"
    }

    fn score(&self, _query: &QueryRecord<f64>, _response: &str, context: &[ContextItem]) -> Result<f64> {
        Ok(if context.is_empty() { 0.0 } else { 1.0 })
    }
}

/// Correctness looked up in a score table keyed by
/// `(query = query_id, entry_id = response text)`.
#[derive(Debug, Clone)]
pub struct TableCorrectness {
    table: ScoreTable<f64>,
}

impl TableCorrectness {
    pub fn new(table: ScoreTable<f64>) -> Self {
        Self { table }
    }
}

impl CorrectnessScorer for TableCorrectness {
    fn name(&self) -> &str {
        "cs-table"
    }

    fn score(&self, query: &QueryRecord<f64>, response: &str, _context: &[ContextItem]) -> Result<f64> {
        self.table
            .get(&query.query_id, response)
            .ok_or_else(|| Error::UnscoredPair {
                query: query.query_id.clone(),
                entry_id: response.to_owned(),
            })
    }
}
