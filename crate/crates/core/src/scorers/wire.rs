//! JSON bodies of the remote scorer protocol (`/score`, `/embed`, `/health`).

use serde::{Deserialize, Serialize};

use crate::store::Modality;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreItem {
    pub entry_id: String,
    pub payload_ref: String,
}

impl ScoreItem {
    pub fn new(entry_id: impl Into<String>, payload_ref: impl Into<String>) -> Self {
        Self {
            entry_id: entry_id.into(),
            payload_ref: payload_ref.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequestBody {
    pub query: String,
    pub items: Vec<ScoreItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponseBody {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedItem {
    pub entry_id: String,
    pub modality: Modality,
    pub payload_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequestBody {
    pub items: Vec<EmbedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponseBody {
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
}
