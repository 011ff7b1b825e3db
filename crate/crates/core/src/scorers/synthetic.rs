//! Deterministic synthetic scorers used as ground-truth oracles.
//!
//! Each score is a pure function of `(seed, query, entry_id)`: a 64-bit
//! FNV-1a hash with a SplitMix64 finalizer, mapped to a fixed interval.

use std::collections::{HashMap, HashSet};

use super::{CostClass, ScoreRequest, Scorer, ScorerDescriptor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Query text to the set of entry ids relevant to it.
pub type RelevanceMap = HashMap<String, HashSet<String>>;

/// Score band of relevant pairs under [`PlantedScorer`].
pub const RELEVANT_BAND: (f64, f64) = (0.78, 0.98);
/// Score band of irrelevant pairs under [`PlantedScorer`].
pub const IRRELEVANT_BAND: (f64, f64) = (0.02, 0.28);
/// Output range of [`NoisyClipScorer`], matching the narrow range observed
/// for image-text cosine similarity.
pub const CLIP_LIKE_RANGE: (f64, f64) = (0.13, 0.35);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Platform-stable pseudo-random value in `[0, 1)` keyed by the triple.
pub fn stable_unit(seed: u64, query: &str, entry_id: &str) -> f64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    // Length prefixes keep ("ab", "c") and ("a", "bc") apart.
    h = fnv1a(h, &(query.len() as u64).to_le_bytes());
    h = fnv1a(h, query.as_bytes());
    h = fnv1a(h, &(entry_id.len() as u64).to_le_bytes());
    h = fnv1a(h, entry_id.as_bytes());
    (splitmix64(h) >> 11) as f64 / (1u64 << 53) as f64
}

fn is_relevant(map: &RelevanceMap, query: &str, entry_id: &str) -> bool {
    map.get(query).is_some_and(|set| set.contains(entry_id))
}

/// Stand-in for a well-separated relevancy model: relevant pairs land in
/// [`RELEVANT_BAND`], all others in [`IRRELEVANT_BAND`].
#[derive(Debug, Clone)]
pub struct PlantedScorer {
    seed: u64,
    relevance: RelevanceMap,
    descriptor: ScorerDescriptor,
}

impl PlantedScorer {
    pub fn new(seed: u64, relevance: RelevanceMap) -> Self {
        Self {
            seed,
            relevance,
            descriptor: ScorerDescriptor {
                name: format!("planted:{seed}"),
                calibrated: true,
                cost_class: CostClass::Expensive,
            },
        }
    }

    pub fn relevance(&self) -> &RelevanceMap {
        &self.relevance
    }

    pub fn raw(&self, query: &str, entry_id: &str) -> f64 {
        let u = stable_unit(self.seed, query, entry_id);
        let (lo, hi) = if is_relevant(&self.relevance, query, entry_id) {
            RELEVANT_BAND
        } else {
            IRRELEVANT_BAND
        };
        lo + (hi - lo) * u
    }
}

impl<T: Scalar> Scorer<T> for PlantedScorer {
    fn descriptor(&self) -> &ScorerDescriptor {
        &self.descriptor
    }

    fn score(&self, req: &ScoreRequest<'_>) -> Result<T> {
        req.validate()?;
        Ok(T::lit(self.raw(req.query_text, req.entry_id)))
    }
}

/// Emulates a cheap similarity score with a narrow range and tunable overlap
/// between the relevant and irrelevant distributions.
///
/// Irrelevant pairs are uniform on `[lo, lo + w)` and relevant pairs on
/// `(hi - w, hi]` with `w = (hi - lo) * (1 + overlap) / 2`. At `overlap = 0`
/// the two bands touch at the midpoint without sharing it; at `overlap = 1`
/// both cover the full range. The best threshold accuracy is `1 / (1 + overlap)`.
#[derive(Debug, Clone)]
pub struct NoisyClipScorer {
    seed: u64,
    relevance: RelevanceMap,
    overlap: f64,
    descriptor: ScorerDescriptor,
}

impl NoisyClipScorer {
    pub fn new(seed: u64, relevance: RelevanceMap, overlap: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&overlap) {
            return Err(Error::InvalidArgument(format!(
                "overlap must be in [0, 1], got {overlap}"
            )));
        }
        Ok(Self {
            seed,
            relevance,
            overlap,
            descriptor: ScorerDescriptor {
                name: format!("clip-like:{seed}:{overlap}"),
                calibrated: true,
                cost_class: CostClass::Cheap,
            },
        })
    }

    pub fn raw(&self, query: &str, entry_id: &str) -> f64 {
        let (lo, hi) = CLIP_LIKE_RANGE;
        let width = (hi - lo) * (1.0 + self.overlap) / 2.0;
        let u = stable_unit(self.seed, query, entry_id);
        if is_relevant(&self.relevance, query, entry_id) {
            hi - width * u
        } else {
            lo + width * u
        }
    }
}

impl<T: Scalar> Scorer<T> for NoisyClipScorer {
    fn descriptor(&self) -> &ScorerDescriptor {
        &self.descriptor
    }

    fn score(&self, req: &ScoreRequest<'_>) -> Result<T> {
        req.validate()?;
        Ok(T::lit(self.raw(req.query_text, req.entry_id)))
    }
}
