use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CostClass, ScoreRequest, Scorer, ScorerDescriptor};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::scalar::Scalar;

/// One line of a score-table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTableRecord {
    pub query: String,
    pub entry_id: String,
    pub score: f64,
}

/// Materialized `(query, entry_id) -> score` map; every score in `[0, 1]`.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable<T> {
    scores: HashMap<String, HashMap<String, T>>,
    len: usize,
}

impl<T: Scalar> ScoreTable<T> {
    pub fn new() -> Self {
        Self {
            scores: HashMap::new(),
            len: 0,
        }
    }

    /// Later inserts of the same pair overwrite earlier ones.
    pub fn insert(&mut self, query: &str, entry_id: &str, score: T) -> Result<()> {
        if !score.in_unit_interval() {
            return Err(Error::UncalibratedScore {
                entry_id: entry_id.to_owned(),
                score: score.to_f64_lossy(),
            });
        }
        let previous = self
            .scores
            .entry(query.to_owned())
            .or_default()
            .insert(entry_id.to_owned(), score);
        if previous.is_none() {
            self.len += 1;
        }
        Ok(())
    }

    pub fn get(&self, query: &str, entry_id: &str) -> Option<T> {
        self.scores.get(query)?.get(entry_id).copied()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut table = Self::new();
        for (line, rec) in jsonl::read_records::<ScoreTableRecord>(reader)? {
            let score = T::from_f64(rec.score).unwrap_or_else(T::nan);
            table
                .insert(&rec.query, &rec.entry_id, score)
                .map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
        }
        Ok(table)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

/// Scores by table lookup. Misses are errors, never defaults.
#[derive(Debug, Clone)]
pub struct TableScorer<T> {
    table: ScoreTable<T>,
    descriptor: ScorerDescriptor,
}

impl<T: Scalar> TableScorer<T> {
    pub fn new(name: impl Into<String>, table: ScoreTable<T>) -> Self {
        Self {
            table,
            descriptor: ScorerDescriptor {
                name: name.into(),
                calibrated: true,
                cost_class: CostClass::Cheap,
            },
        }
    }

    pub fn table(&self) -> &ScoreTable<T> {
        &self.table
    }
}

impl<T: Scalar> Scorer<T> for TableScorer<T> {
    fn descriptor(&self) -> &ScorerDescriptor {
        &self.descriptor
    }

    fn score(&self, req: &ScoreRequest<'_>) -> Result<T> {
        req.validate()?;
        self.table
            .get(req.query_text, req.entry_id)
            .ok_or_else(|| Error::UnscoredPair {
                query: req.query_text.to_owned(),
                entry_id: req.entry_id.to_owned(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::ScoreItem;

    fn table() -> TableScorer<f64> {
        let mut t = ScoreTable::new();
        t.insert("q", "e1", 0.73).unwrap();
        t.insert("q", "e2", 0.2).unwrap();
        t.insert("q", "e3", 0.9).unwrap();
        TableScorer::new("rs-table", t)
    }

    #[test]
    fn lookup_and_miss() {
        let s = table();
        assert_eq!(s.score(&ScoreRequest::new("q", "e1", "")).unwrap(), 0.73);
        let err = s.score(&ScoreRequest::new("q", "e9", "")).unwrap_err();
        assert!(err.to_string().starts_with("unscored pair"));
        assert!(s.score(&ScoreRequest::new("", "e1", "")).is_err());
    }

    #[test]
    fn batch_in_order() {
        let s = table();
        let items = [ScoreItem::new("e2", ""), ScoreItem::new("e3", "")];
        assert_eq!(s.score_batch("q", &items).unwrap(), vec![0.2, 0.9]);
        let one = [ScoreItem::new("e1", "")];
        assert_eq!(s.score_batch("q", &one).unwrap(), vec![0.73]);
        assert!(s.score_batch("q", &[]).is_err());
    }

    #[test]
    fn batch_names_failing_entry() {
        let s = table();
        let items = [ScoreItem::new("e1", ""), ScoreItem::new("missing", "")];
        match s.score_batch("q", &items) {
            Err(Error::Batch { entry_id, .. }) => assert_eq!(entry_id, "missing"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let mut t = ScoreTable::<f64>::new();
        assert!(t.insert("q", "e", 1.5).is_err());
        assert!(t.insert("q", "e", -0.1).is_err());
        assert!(t.is_empty());
    }

    #[test]
    fn reads_file_format() {
        let data = r#"{"query":"a dog","entry_id":"img1","score":0.8}
{"query":"a dog","entry_id":"img2","score":0.1}
"#;
        let t = ScoreTable::<f64>::read_jsonl(data.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a dog", "img2"), Some(0.1));

        let bad = "{\"query\":\"q\",\"entry_id\":\"e\",\"score\":0.5}\n{\"query\":\"q\",\"entry_id\":\"f\",\"score\":2}\n";
        let err = ScoreTable::<f64>::read_jsonl(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
    }
}
