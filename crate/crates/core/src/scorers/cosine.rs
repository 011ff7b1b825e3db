use std::collections::HashMap;

use super::{CostClass, ScoreRequest, Scorer, ScorerDescriptor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::{normalize, Embedding, VectorStore};

/// CLIP-style scorer: cosine between a query embedding (looked up by query
/// text) and an entry embedding. Range is `[-1, 1]`, so it is not calibrated.
#[derive(Debug, Clone)]
pub struct EmbeddingCosineScorer<T> {
    queries: HashMap<String, Embedding<T>>,
    entries: HashMap<String, Embedding<T>>,
    descriptor: ScorerDescriptor,
}

impl<T: Scalar> EmbeddingCosineScorer<T> {
    pub fn new(
        queries: impl IntoIterator<Item = (String, Embedding<T>)>,
        entries: impl IntoIterator<Item = (String, Embedding<T>)>,
    ) -> Result<Self> {
        let norm_all = |it: &mut dyn Iterator<Item = (String, Embedding<T>)>| {
            it.map(|(k, e)| normalize(&e).map(|n| (k, n)))
                .collect::<Result<HashMap<_, _>>>()
        };
        Ok(Self {
            queries: norm_all(&mut queries.into_iter())?,
            entries: norm_all(&mut entries.into_iter())?,
            descriptor: ScorerDescriptor {
                name: "embedding-cosine".into(),
                calibrated: false,
                cost_class: CostClass::Cheap,
            },
        })
    }

    /// Uses the store's corpus embeddings for the entry side.
    pub fn from_store(
        store: &VectorStore<T>,
        queries: impl IntoIterator<Item = (String, Embedding<T>)>,
    ) -> Result<Self> {
        Self::new(
            queries,
            store
                .entries()
                .iter()
                .map(|e| (e.id.clone(), e.embedding.clone())),
        )
    }
}

impl<T: Scalar> Scorer<T> for EmbeddingCosineScorer<T> {
    fn descriptor(&self) -> &ScorerDescriptor {
        &self.descriptor
    }

    fn score(&self, req: &ScoreRequest<'_>) -> Result<T> {
        req.validate()?;
        let q = self.queries.get(req.query_text).ok_or_else(|| Error::UnscoredPair {
            query: req.query_text.to_owned(),
            entry_id: req.entry_id.to_owned(),
        })?;
        let e = self
            .entries
            .get(req.entry_id)
            .ok_or_else(|| Error::UnknownEntry(req.entry_id.to_owned()))?;
        crate::store::cosine(q, e)
    }
}
