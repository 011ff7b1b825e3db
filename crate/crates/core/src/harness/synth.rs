//! Seeded synthetic datasets for exercising the pipeline without real data.
//!
//! Retrieval data mimics the failure mode of cheap cosine retrieval: each
//! query has a handful of relevant entries plus "distractor" entries that sit
//! at least as close to the query in embedding space but are not relevant.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::data::{EvalTriplet, QueryRecord};
use crate::error::{Error, Result};
use crate::store::{CorpusEntry, Embedding, Modality};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub corpus_size: usize,
    pub queries: usize,
    pub dim: usize,
    /// Inclusive range of relevant entries per query.
    pub relevant_min: usize,
    pub relevant_max: usize,
    pub distractors: usize,
    /// Noise scale of relevant entries around their query direction.
    pub relevant_noise: f64,
    /// Noise scale of distractors; smaller means closer to the query.
    pub distractor_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            corpus_size: 1000,
            queries: 100,
            dim: 64,
            relevant_min: 2,
            relevant_max: 5,
            distractors: 6,
            relevant_noise: 1.0,
            distractor_noise: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub corpus: Vec<CorpusEntry<f64>>,
    pub queries: Vec<QueryRecord<f64>>,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect()
}

fn perturbed(rng: &mut ChaCha8Rng, center: &[f64], noise: f64) -> Vec<f64> {
    let scale = noise / (center.len() as f64).sqrt();
    center
        .iter()
        .zip(gaussian(rng, center.len(), scale))
        .map(|(c, n)| c + n)
        .collect()
}

fn entry(i: usize, values: Vec<f64>) -> Result<CorpusEntry<f64>> {
    let id = format!("e{i:05}");
    let (modality, payload_ref) = if i % 4 == 3 {
        (Modality::Text, format!("caption of {id}"))
    } else {
        (Modality::Image, format!("images/{id}.jpg"))
    };
    Ok(CorpusEntry {
        id,
        modality,
        embedding: Embedding::new(values)?,
        payload_ref,
    })
}

pub fn synthetic_retrieval(spec: &SynthSpec) -> Result<SynthDataset> {
    if spec.dim == 0 || spec.queries == 0 || spec.corpus_size == 0 {
        return Err(Error::InvalidArgument("synthetic sizes must be positive".into()));
    }
    if spec.relevant_min == 0 || spec.relevant_min > spec.relevant_max {
        return Err(Error::InvalidArgument("invalid relevant-count range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = 1.0 / (spec.dim as f64).sqrt();

    let mut slots: Vec<Option<Vec<f64>>> = vec![None; spec.corpus_size];
    let mut next = 0usize;
    let mut queries = Vec::with_capacity(spec.queries);
    for j in 0..spec.queries {
        let center = gaussian(&mut rng, spec.dim, unit);
        let n_rel = rng.random_range(spec.relevant_min..=spec.relevant_max);
        let needed = n_rel + spec.distractors;
        if next + needed > spec.corpus_size {
            return Err(Error::InvalidArgument(format!(
                "corpus of {} entries too small for {} queries",
                spec.corpus_size, spec.queries
            )));
        }
        let mut relevant = BTreeSet::new();
        for i in next..next + n_rel {
            slots[i] = Some(perturbed(&mut rng, &center, spec.relevant_noise));
            relevant.insert(format!("e{i:05}"));
        }
        for slot in &mut slots[next + n_rel..next + needed] {
            *slot = Some(perturbed(&mut rng, &center, spec.distractor_noise));
        }
        next += needed;
        queries.push(QueryRecord {
            query_id: format!("q{j:04}"),
            text: format!("synthetic query {j}"),
            embedding: Some(Embedding::new(center)?),
            relevant_ids: Some(relevant),
        });
    }
    let corpus = slots
        .into_iter()
        .enumerate()
        .map(|(i, slot)| {
            let values = slot.unwrap_or_else(|| gaussian(&mut rng, spec.dim, unit));
            entry(i, values)
        })
        .collect::<Result<_>>()?;
    Ok(SynthDataset { corpus, queries })
}

/// `n` triplets with distinct positive and negative statements per item.
pub fn synthetic_triplets(n: usize) -> Vec<EvalTriplet> {
    (0..n)
        .map(|i| EvalTriplet {
            item_id: format!("img{i:05}"),
            payload_ref: format!("images/img{i:05}.jpg"),
            positive: format!("a photo that matches item {i}"),
            negative: format!("a photo unrelated to item {i}"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let spec = SynthSpec::default();
        let a = synthetic_retrieval(&spec).unwrap();
        let b = synthetic_retrieval(&spec).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.queries, b.queries);
        assert_eq!(a.corpus.len(), 1000);
        assert_eq!(a.queries.len(), 100);
        for q in &a.queries {
            let n = q.relevant_ids.as_ref().unwrap().len();
            assert!((2..=6).contains(&n));
        }
    }

    #[test]
    fn too_small_corpus() {
        let spec = SynthSpec {
            corpus_size: 20,
            ..SynthSpec::default()
        };
        assert!(synthetic_retrieval(&spec).is_err());
    }

    #[test]
    fn triplet_statements_differ() {
        let t = synthetic_triplets(3);
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|t| t.positive != t.negative));
    }
}
