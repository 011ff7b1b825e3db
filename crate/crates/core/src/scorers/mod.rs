//! Relevancy-scorer contract and its implementations.
//!
//! The relevancy score, the correctness score and the embedding cosine all
//! conform to [`Scorer`]; only calibrated scorers (guaranteed `[0, 1]`) can
//! drive up-to-k selection.

mod cosine;
mod remote;
mod synthetic;
mod table;
pub mod wire;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use cosine::EmbeddingCosineScorer;
pub use remote::{RemoteScorer, DEFAULT_CHUNK_SIZE, DEFAULT_MAX_IN_FLIGHT};
pub use synthetic::{
    stable_unit, NoisyClipScorer, PlantedScorer, RelevanceMap, CLIP_LIKE_RANGE, IRRELEVANT_BAND,
    RELEVANT_BAND,
};
pub use table::{ScoreTable, ScoreTableRecord, TableScorer};
pub use wire::ScoreItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostClass {
    Cheap,
    Expensive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerDescriptor {
    pub name: String,
    /// True iff every emitted score is guaranteed to lie in `[0, 1]`.
    pub calibrated: bool,
    pub cost_class: CostClass,
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub query_text: &'a str,
    pub entry_id: &'a str,
    pub payload_ref: &'a str,
}

impl<'a> ScoreRequest<'a> {
    pub fn new(query_text: &'a str, entry_id: &'a str, payload_ref: &'a str) -> Self {
        Self {
            query_text,
            entry_id,
            payload_ref,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.query_text.is_empty() {
            return Err(Error::InvalidArgument("query text is empty".into()));
        }
        Ok(())
    }
}

pub trait Scorer<T: Scalar>: Send + Sync {
    fn descriptor(&self) -> &ScorerDescriptor;

    fn score(&self, req: &ScoreRequest<'_>) -> Result<T>;

    /// Scores `items` against one query; `out[i]` belongs to `items[i]`.
    /// Must agree with calling [`Scorer::score`] on each item in turn.
    fn score_batch(&self, query_text: &str, items: &[ScoreItem]) -> Result<Vec<T>> {
        validate_batch(query_text, items)?;
        items
            .iter()
            .map(|item| {
                self.score(&ScoreRequest::new(query_text, &item.entry_id, &item.payload_ref))
                    .map_err(|e| Error::Batch {
                        entry_id: item.entry_id.clone(),
                        source: Box::new(e),
                    })
            })
            .collect()
    }
}

pub(crate) fn validate_batch(query_text: &str, items: &[ScoreItem]) -> Result<()> {
    if query_text.is_empty() {
        return Err(Error::InvalidArgument("query text is empty".into()));
    }
    if items.is_empty() {
        return Err(Error::Empty("score batch has no items"));
    }
    Ok(())
}

/// Errors unless the scorer is calibrated to `[0, 1]`.
pub fn require_calibrated<T: Scalar, S: Scorer<T> + ?Sized>(scorer: &S) -> Result<()> {
    let d = scorer.descriptor();
    if d.calibrated {
        Ok(())
    } else {
        Err(Error::NotCalibrated {
            scorer: d.name.clone(),
        })
    }
}

impl<T: Scalar, S: Scorer<T> + ?Sized> Scorer<T> for &S {
    fn descriptor(&self) -> &ScorerDescriptor {
        (**self).descriptor()
    }
    fn score(&self, req: &ScoreRequest<'_>) -> Result<T> {
        (**self).score(req)
    }
    fn score_batch(&self, query_text: &str, items: &[ScoreItem]) -> Result<Vec<T>> {
        (**self).score_batch(query_text, items)
    }
}

impl<T: Scalar, S: Scorer<T> + ?Sized> Scorer<T> for Box<S> {
    fn descriptor(&self) -> &ScorerDescriptor {
        (**self).descriptor()
    }
    fn score(&self, req: &ScoreRequest<'_>) -> Result<T> {
        (**self).score(req)
    }
    fn score_batch(&self, query_text: &str, items: &[ScoreItem]) -> Result<Vec<T>> {
        (**self).score_batch(query_text, items)
    }
}

impl<T: Scalar, S: Scorer<T> + ?Sized> Scorer<T> for Arc<S> {
    fn descriptor(&self) -> &ScorerDescriptor {
        (**self).descriptor()
    }
    fn score(&self, req: &ScoreRequest<'_>) -> Result<T> {
        (**self).score(req)
    }
    fn score_batch(&self, query_text: &str, items: &[ScoreItem]) -> Result<Vec<T>> {
        (**self).score_batch(query_text, items)
    }
}
