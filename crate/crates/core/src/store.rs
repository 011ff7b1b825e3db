//! In-memory vector store with exact cosine top-l candidate generation.
//!
//! Embeddings are normalized once, at ingest for corpus entries and once per
//! query, so cosine similarity reduces to a dot product during the scan.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cmp_desc, Scalar};

/// Fixed-dimension real vector in the shared query/entry space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<T>",
    into = "Vec<T>",
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct Embedding<T> {
    values: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    /// Validates dimension and finiteness.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyEmbedding);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        dot(&self.values, &self.values).sqrt()
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Embedding<T> {
    type Error = Error;

    fn try_from(values: Vec<T>) -> Result<Self> {
        Self::new(values)
    }
}

impl<T> From<Embedding<T>> for Vec<T> {
    fn from(e: Embedding<T>) -> Self {
        e.values
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Scales `e` to unit Euclidean norm.
pub fn normalize<T: Scalar>(e: &Embedding<T>) -> Result<Embedding<T>> {
    let norm = e.norm();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(Error::DegenerateEmbedding);
    }
    Ok(Embedding {
        values: e.values.iter().map(|&v| v / norm).collect(),
    })
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
pub fn cosine<T: Scalar>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let na = a.norm();
    let nb = b.norm();
    if !(na > T::zero()) || !(nb > T::zero()) {
        return Err(Error::DegenerateEmbedding);
    }
    // Product of norms is symmetric, so cosine(a, b) == cosine(b, a) bitwise.
    let c = dot(&a.values, &b.values) / (na * nb);
    Ok(c.max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Modality::Image),
            "text" => Ok(Modality::Text),
            other => Err(Error::InvalidArgument(format!("unknown modality {other:?}"))),
        }
    }
}

/// One knowledge-base item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct CorpusEntry<T> {
    pub id: String,
    pub modality: Modality,
    pub embedding: Embedding<T>,
    /// File path or caption text; opaque to the store.
    pub payload_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityHit<T> {
    pub entry_id: String,
    pub clip_score: T,
    /// 1-based.
    pub rank: usize,
}

/// Immutable store built by [`VectorStore::ingest`]. Safe to query from
/// many threads at once.
#[derive(Debug, Clone)]
pub struct VectorStore<T> {
    dim: usize,
    entries: Vec<CorpusEntry<T>>,
    // Row-major normalized embeddings, `entries.len() * dim` values.
    unit: Vec<T>,
    by_id: HashMap<String, usize>,
}

impl<T: Scalar> VectorStore<T> {
    pub fn ingest(entries: Vec<CorpusEntry<T>>) -> Result<Self> {
        let first = entries.first().ok_or(Error::Empty("corpus has no entries"))?;
        let dim = first.embedding.dim();
        let mut by_id = HashMap::with_capacity(entries.len());
        let mut unit = Vec::with_capacity(entries.len() * dim);
        for (i, entry) in entries.iter().enumerate() {
            if entry.embedding.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: entry.embedding.dim(),
                }
                .context(format!("entry {}", entry.id)));
            }
            if by_id.insert(entry.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(entry.id.clone()));
            }
            let normalized =
                normalize(&entry.embedding).map_err(|e| e.context(format!("entry {}", entry.id)))?;
            unit.extend_from_slice(normalized.as_slice());
        }
        Ok(Self {
            dim,
            entries,
            unit,
            by_id,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[CorpusEntry<T>] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&CorpusEntry<T>> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    /// Unit-norm embedding of the entry at `index`.
    pub fn unit_embedding(&self, index: usize) -> &[T] {
        &self.unit[index * self.dim..(index + 1) * self.dim]
    }

    /// Exact top-`l` entries by cosine to `query`, descending, ties broken by
    /// ascending entry id.
    pub fn top_l(&self, query: &Embedding<T>, l: usize) -> Result<Vec<SimilarityHit<T>>> {
        if l == 0 {
            return Err(Error::InvalidArgument("l must be at least 1".into()));
        }
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.dim(),
            });
        }
        let q = normalize(query)?;
        let one = T::one();
        let mut scored: Vec<(T, usize)> = (0..self.len())
            .map(|i| {
                let c = dot(q.as_slice(), self.unit_embedding(i));
                (c.max(-one).min(one), i)
            })
            .collect();
        let order = |a: &(T, usize), b: &(T, usize)| -> Ordering {
            cmp_desc(a.0, b.0).then_with(|| self.entries[a.1].id.cmp(&self.entries[b.1].id))
        };
        let take = l.min(scored.len());
        if take < scored.len() {
            scored.select_nth_unstable_by(take - 1, order);
            scored.truncate(take);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(r, (clip_score, i))| SimilarityHit {
                entry_id: self.entries[i].id.clone(),
                clip_score,
                rank: r + 1,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn emb(v: &[f64]) -> Embedding<f64> {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn entry(id: &str, v: &[f64]) -> CorpusEntry<f64> {
        CorpusEntry {
            id: id.into(),
            modality: Modality::Image,
            embedding: emb(v),
            payload_ref: format!("{id}.jpg"),
        }
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&emb(&[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(n.as_slice()[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(n.as_slice()[1], 0.8, epsilon = 1e-15);
        assert_eq!(normalize(&emb(&[1.0, 0.0])).unwrap().as_slice(), &[1.0, 0.0]);
        assert!(matches!(
            normalize(&emb(&[0.0, 0.0])),
            Err(Error::DegenerateEmbedding)
        ));
    }

    #[test]
    fn embedding_validation() {
        assert!(matches!(Embedding::<f64>::new(vec![]), Err(Error::EmptyEmbedding)));
        assert!(matches!(
            Embedding::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine(&emb(&[1.0, 0.0]), &emb(&[0.6, 0.8])).unwrap(),
            0.6,
            epsilon = 1e-15
        );
        assert!(matches!(
            cosine(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            cosine(&emb(&[1.0, 0.0]), &emb(&[0.0, 0.0])),
            Err(Error::DegenerateEmbedding)
        ));
    }

    #[test]
    fn ingest_examples() {
        let store = VectorStore::ingest(vec![
            entry("a", &[1.0, 0.0]),
            entry("b", &[0.0, 1.0]),
            entry("c", &[1.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(store.dim(), 2);

        let err = VectorStore::ingest(vec![entry("a", &[1.0]), entry("a", &[2.0])]).unwrap_err();
        assert_eq!(err.to_string(), "duplicate id a");

        let err = VectorStore::ingest(vec![
            entry("a", &[1.0, 0.0, 0.0, 0.0]),
            entry("b", &[1.0, 0.0, 0.0, 0.0, 0.0]),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));

        assert!(VectorStore::<f64>::ingest(vec![]).is_err());
        assert!(matches!(
            VectorStore::ingest(vec![entry("z", &[0.0, 0.0])]),
            Err(Error::Context { .. })
        ));
    }

    #[test]
    fn top_l_basics() {
        let store = VectorStore::ingest(vec![
            entry("a", &[1.0, 0.0]),
            entry("b", &[0.0, 1.0]),
            entry("c", &[1.0, 1.0]),
        ])
        .unwrap();
        let hits = store.top_l(&emb(&[0.0, 2.0]), 10).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.entry_id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
        assert_eq!(hits[0].clip_score, 1.0);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2, 3]);

        assert!(matches!(
            store.top_l(&emb(&[1.0, 0.0]), 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            store.top_l(&emb(&[1.0, 0.0, 0.0]), 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn top_l_tie_break_by_id() {
        let store = VectorStore::ingest(vec![
            entry("d", &[1.0, 0.0]),
            entry("b", &[2.0, 0.0]),
            entry("c", &[0.0, 1.0]),
            entry("a", &[5.0, 0.0]),
        ])
        .unwrap();
        let hits = store.top_l(&emb(&[1.0, 0.0]), 2).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.entry_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn works_with_f32() {
        let store = VectorStore::<f32>::ingest(vec![CorpusEntry {
            id: "x".into(),
            modality: Modality::Text,
            embedding: Embedding::new(vec![3.0f32, 4.0]).unwrap(),
            payload_ref: "caption".into(),
        }])
        .unwrap();
        let hits = store.top_l(&Embedding::new(vec![0.6f32, 0.8]).unwrap(), 1).unwrap();
        assert!((hits[0].clip_score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn modality_parse() {
        assert_eq!("image".parse::<Modality>().unwrap(), Modality::Image);
        assert!("audio".parse::<Modality>().is_err());
        assert_eq!(serde_json::to_string(&Modality::Text).unwrap(), "\"text\"");
    }
}
