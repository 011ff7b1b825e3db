//! Line-delimited dataset files: corpus, queries, evaluation triplets.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::scalar::Scalar;
use crate::scorers::RelevanceMap;
use crate::store::{CorpusEntry, Embedding};

fn ensure_nonempty<R>(records: &[R], what: &'static str) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Empty(what));
    }
    Ok(())
}

/// Parses corpus records, rejecting duplicate ids and inconsistent
/// dimensions with the offending line numbers.
pub fn read_corpus<T: Scalar>(reader: impl BufRead) -> Result<Vec<CorpusEntry<T>>> {
    let records = jsonl::read_records::<CorpusEntry<T>>(reader)?;
    ensure_nonempty(&records, "corpus file has no records")?;
    let dim = records[0].1.embedding.dim();
    let mut seen: HashMap<&str, usize> = HashMap::with_capacity(records.len());
    for (line, entry) in &records {
        if let Some(first) = seen.insert(entry.id.as_str(), *line) {
            return Err(Error::Parse {
                line: *line,
                message: format!("duplicate id {} (first on line {first})", entry.id),
            });
        }
        if entry.embedding.dim() != dim {
            return Err(Error::Parse {
                line: *line,
                message: format!(
                    "dimension mismatch: expected {dim}, found {}",
                    entry.embedding.dim()
                ),
            });
        }
    }
    Ok(records.into_iter().map(|(_, e)| e).collect())
}

pub fn load_corpus<T: Scalar>(path: &Path) -> Result<Vec<CorpusEntry<T>>> {
    with_file(path, read_corpus)
}

fn with_file<R>(path: &Path, f: impl FnOnce(std::io::BufReader<std::fs::File>) -> Result<R>) -> Result<R> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::from(e).context(path.display().to_string()))?;
    f(std::io::BufReader::new(file)).map_err(|e| e.context(path.display().to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct QueryRecord<T> {
    pub query_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding<T>>,
    /// Ground truth, when known (synthetic runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant_ids: Option<BTreeSet<String>>,
}

pub fn read_queries<T: Scalar>(reader: impl BufRead) -> Result<Vec<QueryRecord<T>>> {
    let records = jsonl::read_records::<QueryRecord<T>>(reader)?;
    ensure_nonempty(&records, "query file has no records")?;
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (line, q) in &records {
        if q.text.is_empty() {
            return Err(Error::Parse {
                line: *line,
                message: "empty query text".into(),
            });
        }
        if let Some(first) = seen.insert(q.query_id.as_str(), *line) {
            return Err(Error::Parse {
                line: *line,
                message: format!("duplicate query_id {} (first on line {first})", q.query_id),
            });
        }
    }
    Ok(records.into_iter().map(|(_, q)| q).collect())
}

pub fn load_queries<T: Scalar>(path: &Path) -> Result<Vec<QueryRecord<T>>> {
    with_file(path, read_queries)
}

/// Query text to ground-truth relevant ids, for queries that carry them.
pub fn relevance_from_queries<T>(queries: &[QueryRecord<T>]) -> RelevanceMap {
    let mut map = RelevanceMap::new();
    for q in queries {
        if let Some(ids) = &q.relevant_ids {
            map.entry(q.text.clone())
                .or_default()
                .extend(ids.iter().cloned());
        }
    }
    map
}

/// An item with one statement that describes it and one that does not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalTriplet {
    pub item_id: String,
    pub payload_ref: String,
    pub positive: String,
    pub negative: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletSet {
    pub triplets: Vec<EvalTriplet>,
    pub warnings: Vec<String>,
}

pub fn read_triplets(reader: impl BufRead) -> Result<TripletSet> {
    let records = jsonl::read_records::<EvalTriplet>(reader)?;
    ensure_nonempty(&records, "triplet file has no records")?;
    let mut set = TripletSet::default();
    for (line, t) in records {
        if t.positive.is_empty() || t.negative.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty statement".into(),
            });
        }
        if t.positive == t.negative {
            set.warnings.push(format!(
                "line {line}: item {} has identical positive and negative statements",
                t.item_id
            ));
        }
        set.triplets.push(t);
    }
    Ok(set)
}

pub fn load_triplets(path: &Path) -> Result<TripletSet> {
    with_file(path, read_triplets)
}

/// Each positive statement is relevant to its own item only.
pub fn relevance_from_triplets(triplets: &[EvalTriplet]) -> RelevanceMap {
    let mut map = RelevanceMap::new();
    for t in triplets {
        map.entry(t.positive.clone())
            .or_default()
            .insert(t.item_id.clone());
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORPUS: &str = r#"{"id":"a","modality":"image","embedding":[1,0,0],"payload_ref":"a.jpg"}
{"id":"b","modality":"text","embedding":[0,1,0],"payload_ref":"a caption"}
{"id":"c","modality":"image","embedding":[0,0,1],"payload_ref":"c.jpg"}
"#;

    #[test]
    fn corpus_valid() {
        let entries = read_corpus::<f64>(CORPUS.as_bytes()).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[1].payload_ref, "a caption");
    }

    #[test]
    fn corpus_missing_embedding() {
        let data = "{\"id\":\"a\",\"modality\":\"image\",\"embedding\":[1],\"payload_ref\":\"x\"}\n{\"id\":\"b\",\"modality\":\"image\",\"payload_ref\":\"y\"}\n";
        let err = read_corpus::<f64>(data.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: missing field embedding");
    }

    #[test]
    fn corpus_duplicate_names_both_lines() {
        let data = "{\"id\":\"a\",\"modality\":\"image\",\"embedding\":[1],\"payload_ref\":\"x\"}\n{\"id\":\"b\",\"modality\":\"image\",\"embedding\":[1],\"payload_ref\":\"x\"}\n{\"id\":\"a\",\"modality\":\"image\",\"embedding\":[2],\"payload_ref\":\"y\"}\n";
        let err = read_corpus::<f64>(data.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("line 1") && err.contains("duplicate id a"), "{err}");
    }

    #[test]
    fn corpus_rejects_bad_values() {
        assert!(read_corpus::<f64>("".as_bytes()).is_err());
        let bad_mod = "{\"id\":\"a\",\"modality\":\"audio\",\"embedding\":[1],\"payload_ref\":\"x\"}\n";
        assert!(read_corpus::<f64>(bad_mod.as_bytes()).is_err());
        let empty_emb = "{\"id\":\"a\",\"modality\":\"text\",\"embedding\":[],\"payload_ref\":\"x\"}\n";
        assert!(read_corpus::<f64>(empty_emb.as_bytes()).is_err());
        let dims = "{\"id\":\"a\",\"modality\":\"text\",\"embedding\":[1,2],\"payload_ref\":\"x\"}\n{\"id\":\"b\",\"modality\":\"text\",\"embedding\":[1],\"payload_ref\":\"x\"}\n";
        let err = read_corpus::<f64>(dims.as_bytes()).unwrap_err().to_string();
        assert!(err.starts_with("line 2: dimension mismatch"), "{err}");
    }

    #[test]
    fn queries_optional_fields() {
        let data = r#"{"query_id":"q1","text":"a dog"}
{"query_id":"q2","text":"a cat","embedding":[0.1,0.2],"relevant_ids":["x","y"]}
"#;
        let qs = read_queries::<f64>(data.as_bytes()).unwrap();
        assert!(qs[0].embedding.is_none());
        assert_eq!(qs[1].relevant_ids.as_ref().unwrap().len(), 2);
        let map = relevance_from_queries(&qs);
        assert_eq!(map.len(), 1);
        assert!(map["a cat"].contains("y"));

        assert!(read_queries::<f64>("{\"query_id\":\"q\",\"text\":\"\"}\n".as_bytes()).is_err());
    }

    #[test]
    fn triplets() {
        let data = r#"{"item_id":"i1","payload_ref":"i1.jpg","positive":"a red bus","negative":"a blue boat"}
{"item_id":"i2","payload_ref":"i2.jpg","positive":"same","negative":"same"}
"#;
        let set = read_triplets(data.as_bytes()).unwrap();
        assert_eq!(set.triplets.len(), 2);
        assert_eq!(set.warnings.len(), 1);
        assert!(set.warnings[0].starts_with("line 2"));

        assert!(read_triplets("\n".as_bytes()).is_err());
        let missing = "{\"item_id\":\"i1\",\"payload_ref\":\"p\",\"positive\":\"x\"}\n";
        let err = read_triplets(missing.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 1: missing field negative");
    }
}
