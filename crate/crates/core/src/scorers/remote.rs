//! HTTP client for the scorer service.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{
    EmbedItem, EmbedRequestBody, EmbedResponseBody, HealthResponse, ScoreRequestBody,
    ScoreResponseBody,
};
use super::{validate_batch, CostClass, ScoreItem, ScoreRequest, Scorer, ScorerDescriptor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_CHUNK_SIZE: usize = 32;

/// Calibrated scorer backed by `POST /score`. Large batches are split into
/// chunks sent with at most `max_in_flight` concurrent requests; results are
/// reassembled in input order.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    base: String,
    client: Client,
    max_in_flight: usize,
    chunk_size: usize,
    descriptor: ScorerDescriptor,
}

impl RemoteScorer {
    pub fn new(endpoint: &str) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let base = endpoint.trim_end_matches('/').to_owned();
        Ok(Self {
            descriptor: ScorerDescriptor {
                name: format!("remote:{base}"),
                calibrated: true,
                cost_class: CostClass::Expensive,
            },
            base,
            client,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            chunk_size: DEFAULT_CHUNK_SIZE,
        })
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn with_chunk_size(mut self, n: usize) -> Self {
        self.chunk_size = n.max(1);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        let url = format!("{}{}", self.base, path);
        let resp = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        Self::decode(&url, resp)
    }

    fn decode<R: DeserializeOwned>(url: &str, resp: reqwest::blocking::Response) -> Result<R> {
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| Error::Transport(format!("{url}: reading body: {e}")))?;
        if !status.is_success() {
            return Err(Error::Transport(format!("{url}: HTTP {status}: {text}")));
        }
        serde_json::from_str(&text)
            .map_err(|e| Error::Protocol(format!("{url}: malformed body: {e}")))
    }

    pub fn health(&self) -> Result<HealthResponse> {
        let url = format!("{}/health", self.base);
        let resp = self
            .client
            .get(&url)
            .send()
            .map_err(|e| Error::Transport(format!("GET {url}: {e}")))?;
        let health: HealthResponse = Self::decode(&url, resp)?;
        if health.status != "ok" {
            return Err(Error::Protocol(format!("service status {:?}", health.status)));
        }
        Ok(health)
    }

    /// Embeds items through `POST /embed`, one vector per item in order.
    pub fn embed(&self, items: &[EmbedItem]) -> Result<Vec<Vec<f64>>> {
        if items.is_empty() {
            return Err(Error::Empty("embed batch has no items"));
        }
        let body = EmbedRequestBody {
            items: items.to_vec(),
        };
        let resp: EmbedResponseBody = self.post("/embed", &body)?;
        if resp.embeddings.len() != items.len() {
            return Err(Error::Protocol(format!(
                "length mismatch: sent {} items, got {} embeddings",
                items.len(),
                resp.embeddings.len()
            )));
        }
        Ok(resp.embeddings)
    }

    fn score_chunk<T: Scalar>(&self, query: &str, items: &[ScoreItem]) -> Result<Vec<T>> {
        let body = ScoreRequestBody {
            query: query.to_owned(),
            items: items.to_vec(),
        };
        let resp: ScoreResponseBody = self.post("/score", &body)?;
        if resp.scores.len() != items.len() {
            return Err(Error::Protocol(format!(
                "length mismatch: sent {} items, got {} scores",
                items.len(),
                resp.scores.len()
            )));
        }
        resp.scores
            .iter()
            .zip(items)
            .map(|(&s, item)| {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::Batch {
                        entry_id: item.entry_id.clone(),
                        source: Box::new(Error::Protocol(format!("score out of range: {s}"))),
                    });
                }
                Ok(T::lit(s))
            })
            .collect()
    }
}

impl<T: Scalar> Scorer<T> for RemoteScorer {
    fn descriptor(&self) -> &ScorerDescriptor {
        &self.descriptor
    }

    fn score(&self, req: &ScoreRequest<'_>) -> Result<T> {
        req.validate()?;
        let item = [ScoreItem::new(req.entry_id, req.payload_ref)];
        Ok(self.score_chunk::<T>(req.query_text, &item)?[0])
    }

    fn score_batch(&self, query_text: &str, items: &[ScoreItem]) -> Result<Vec<T>> {
        validate_batch(query_text, items)?;
        let chunks: Vec<&[ScoreItem]> = items.chunks(self.chunk_size).collect();
        if chunks.len() == 1 {
            return self.score_chunk(query_text, items);
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<Vec<T>>>>> =
            Mutex::new((0..chunks.len()).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..self.max_in_flight.min(chunks.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(chunk) = chunks.get(i) else { break };
                    let result = self.score_chunk(query_text, chunk);
                    slots.lock().expect("slot lock")[i] = Some(result);
                });
            }
        });
        let mut out = Vec::with_capacity(items.len());
        for slot in slots.into_inner().expect("slot lock") {
            out.extend(slot.expect("every chunk scored")?);
        }
        Ok(out)
    }
}
