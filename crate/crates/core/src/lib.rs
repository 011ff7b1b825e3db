//! Two-stage multimodal retrieval with relevancy re-ranking.
//!
//! A cheap cosine scan over precomputed embeddings proposes `l` candidates,
//! an expensive calibrated relevancy scorer re-scores them, and adaptive
//! up-to-k selection keeps only what clears the relevancy thresholds. The
//! [`harness`] module measures scorer separation, retrieval relevancy and
//! end-to-end confidence on top of that pipeline.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the harness and CLI use.

pub mod analytics;
pub mod error;
pub mod harness;
mod jsonl;
pub mod rerank;
pub mod scalar;
pub mod scorers;
pub mod store;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type Embedding = store::Embedding<f64>;
pub type CorpusEntry = store::CorpusEntry<f64>;
pub type SimilarityHit = store::SimilarityHit<f64>;
pub type VectorStore = store::VectorStore<f64>;
pub type ScoredCandidate = rerank::ScoredCandidate<f64>;
pub type ScoreHistogram = analytics::ScoreHistogram<f64>;
pub type AccuracyCurve = analytics::AccuracyCurve<f64>;
pub type RankProfile = analytics::RankProfile<f64>;
pub type ScoreTable = scorers::ScoreTable<f64>;
pub type QueryRecord = harness::QueryRecord<f64>;

pub type Embedding32 = store::Embedding<f32>;
pub type VectorStore32 = store::VectorStore<f32>;
