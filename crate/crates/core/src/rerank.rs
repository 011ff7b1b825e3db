//! Selection policies: plain top-k, direct relevancy selection over the whole
//! corpus, and two-stage re-ranking with adaptive up-to-k selection.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cmp_desc, Scalar};
use crate::scorers::{require_calibrated, ScoreItem, Scorer};
use crate::store::{Embedding, VectorStore};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_L: usize = 20;
pub const DEFAULT_TAU_LO: f64 = 0.3;
pub const DEFAULT_TAU_HI: f64 = 0.75;
pub const DEFAULT_TIMING_REPETITIONS: usize = 5;

/// One entry flowing through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate<T> {
    pub entry_id: String,
    /// Stage-1 cosine; absent when the entry never went through stage 1.
    pub clip_score: Option<T>,
    /// Relevancy score in `[0, 1]`.
    pub rs: T,
    pub clip_rank: Option<usize>,
    /// 1-based position in the final output; 0 until selected.
    pub final_rank: usize,
}

impl<T: Scalar> ScoredCandidate<T> {
    pub fn new(entry_id: impl Into<String>, rs: T) -> Self {
        Self {
            entry_id: entry_id.into(),
            clip_score: None,
            rs,
            clip_rank: None,
            final_rank: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TopKClip,
    DirectRs,
    Rerank,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topk" | "top_k_clip" => Ok(Method::TopKClip),
            "direct" | "direct_rs" => Ok(Method::DirectRs),
            "rerank" => Ok(Method::Rerank),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub method: Method,
    pub k: usize,
    /// Stage-1 candidate count; only read by [`Method::Rerank`].
    pub l: usize,
    pub tau_lo: f64,
    pub tau_hi: f64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self::rerank(DEFAULT_K, DEFAULT_L)
    }
}

impl SelectionPolicy {
    pub fn top_k_clip(k: usize) -> Self {
        Self {
            method: Method::TopKClip,
            k,
            l: k,
            tau_lo: DEFAULT_TAU_LO,
            tau_hi: DEFAULT_TAU_HI,
        }
    }

    pub fn direct_rs(k: usize) -> Self {
        Self {
            method: Method::DirectRs,
            ..Self::top_k_clip(k)
        }
    }

    pub fn rerank(k: usize, l: usize) -> Self {
        Self {
            method: Method::Rerank,
            l,
            ..Self::top_k_clip(k)
        }
    }

    pub fn with_thresholds(mut self, tau_lo: f64, tau_hi: f64) -> Self {
        self.tau_lo = tau_lo;
        self.tau_hi = tau_hi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        validate_thresholds(self.tau_lo, self.tau_hi)?;
        if self.method == Method::Rerank && self.l <= self.k {
            return Err(Error::InvalidArgument(format!(
                "rerank needs l > k (l = {}, k = {})",
                self.l, self.k
            )));
        }
        Ok(())
    }

    /// Stable name used in reports, e.g. `rerank_l20`.
    pub fn label(&self) -> String {
        match self.method {
            Method::TopKClip => "top_k_clip".into(),
            Method::DirectRs => "direct_rs".into(),
            Method::Rerank => format!("rerank_l{}", self.l),
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (k={}, tau_lo={}, tau_hi={})",
            self.label(),
            self.k,
            self.tau_lo,
            self.tau_hi
        )
    }
}

fn validate_thresholds(tau_lo: f64, tau_hi: f64) -> Result<()> {
    if !(0.0 <= tau_lo && tau_lo <= tau_hi && tau_hi <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "thresholds must satisfy 0 <= tau_lo <= tau_hi <= 1 (got {tau_lo}, {tau_hi})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalTiming {
    pub stage1_secs: f64,
    pub stage2_secs: f64,
    /// Number of expensive-scorer evaluations made during retrieval.
    pub scored_count: usize,
}

impl RetrievalTiming {
    pub fn total_secs(&self) -> f64 {
        self.stage1_secs + self.stage2_secs
    }
}

fn rank_key(r: Option<usize>) -> usize {
    r.unwrap_or(usize::MAX)
}

/// Relevancy descending, then stage-1 rank ascending (absent last), then id.
pub fn relevancy_order<T: Scalar>(a: &ScoredCandidate<T>, b: &ScoredCandidate<T>) -> Ordering {
    cmp_desc(a.rs, b.rs)
        .then_with(|| rank_key(a.clip_rank).cmp(&rank_key(b.clip_rank)))
        .then_with(|| a.entry_id.cmp(&b.entry_id))
}

fn clip_order<T: Scalar>(a: &ScoredCandidate<T>, b: &ScoredCandidate<T>) -> Ordering {
    let key = |c: &ScoredCandidate<T>| c.clip_score.unwrap_or_else(T::neg_infinity);
    cmp_desc(key(a), key(b))
        .then_with(|| rank_key(a.clip_rank).cmp(&rank_key(b.clip_rank)))
        .then_with(|| a.entry_id.cmp(&b.entry_id))
}

fn finish<T: Scalar>(mut kept: Vec<ScoredCandidate<T>>, k: usize) -> Vec<ScoredCandidate<T>> {
    kept.truncate(k);
    for (i, c) in kept.iter_mut().enumerate() {
        c.final_rank = i + 1;
    }
    kept
}

/// Median of a non-empty slice; the mean of the two central values when
/// the length is even.
fn median<T: Scalar>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::lit(2.0)
    }
}

/// Adaptive up-to-k selection.
///
/// Scores below `tau_lo` are dropped and scores above `tau_hi` kept. Within
/// the band `[tau_lo, tau_hi]` only entries at or above the band's median
/// survive. Of everything kept, at most `k` highest-scoring entries are
/// returned, possibly none.
///
/// Every score above `tau_hi` exceeds the band median, so the kept set is
/// exactly `{rs >= median}` (or `{rs > tau_hi}` for an empty band) and the
/// output is a prefix of the relevancy ordering.
pub fn select_up_to_k<T: Scalar>(
    candidates: &[ScoredCandidate<T>],
    k: usize,
    tau_lo: T,
    tau_hi: T,
) -> Result<Vec<ScoredCandidate<T>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    validate_thresholds(tau_lo.to_f64_lossy(), tau_hi.to_f64_lossy())?;
    if let Some(bad) = candidates.iter().find(|c| !c.rs.in_unit_interval()) {
        return Err(Error::UncalibratedScore {
            entry_id: bad.entry_id.clone(),
            score: bad.rs.to_f64_lossy(),
        });
    }

    let mut band: Vec<T> = candidates
        .iter()
        .map(|c| c.rs)
        .filter(|&rs| rs >= tau_lo && rs <= tau_hi)
        .collect();
    let band_median = (!band.is_empty()).then(|| median(&mut band));
    let keep = |rs: T| match band_median {
        Some(m) => rs >= m,
        None => rs > tau_hi,
    };

    let mut kept: Vec<ScoredCandidate<T>> =
        candidates.iter().filter(|c| keep(c.rs)).cloned().collect();
    kept.sort_by(relevancy_order);
    Ok(finish(kept, k))
}

/// Which score [`select_top_k`] ranks by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    Clip,
    Relevancy,
}

/// The `min(k, n)` best candidates under `by`, best first.
pub fn select_top_k<T: Scalar>(
    candidates: &[ScoredCandidate<T>],
    k: usize,
    by: RankBy,
) -> Vec<ScoredCandidate<T>> {
    let mut all = candidates.to_vec();
    match by {
        RankBy::Clip => all.sort_by(clip_order),
        RankBy::Relevancy => all.sort_by(relevancy_order),
    }
    finish(all, k)
}

fn score_items<T: Scalar>(store: &VectorStore<T>, ids: &[&str]) -> Result<Vec<ScoreItem>> {
    ids.iter()
        .map(|id| {
            store
                .get(id)
                .map(|e| ScoreItem::new(e.id.clone(), e.payload_ref.clone()))
                .ok_or_else(|| Error::UnknownEntry((*id).to_owned()))
        })
        .collect()
}

fn require_method(policy: &SelectionPolicy, method: Method) -> Result<()> {
    policy.validate()?;
    if policy.method != method {
        return Err(Error::InvalidArgument(format!(
            "policy {} used where {method:?} is required",
            policy.label()
        )));
    }
    Ok(())
}

/// Two-stage retrieval: cosine top-`l` from the store, relevancy scoring of
/// those candidates, then up-to-k selection.
pub fn two_stage_retrieve<T: Scalar, S: Scorer<T> + ?Sized>(
    store: &VectorStore<T>,
    scorer: &S,
    query_text: &str,
    query_embedding: &Embedding<T>,
    policy: &SelectionPolicy,
) -> Result<(Vec<ScoredCandidate<T>>, RetrievalTiming)> {
    require_method(policy, Method::Rerank)?;
    require_calibrated(scorer)?;

    let start = Instant::now();
    let hits = store.top_l(query_embedding, policy.l)?;
    let stage1 = start.elapsed();

    let start = Instant::now();
    let ids: Vec<&str> = hits.iter().map(|h| h.entry_id.as_str()).collect();
    let items = score_items(store, &ids)?;
    let scores = scorer.score_batch(query_text, &items)?;
    let candidates: Vec<ScoredCandidate<T>> = hits
        .into_iter()
        .zip(scores)
        .map(|(hit, rs)| ScoredCandidate {
            entry_id: hit.entry_id,
            clip_score: Some(hit.clip_score),
            rs,
            clip_rank: Some(hit.rank),
            final_rank: 0,
        })
        .collect();
    let selected = select_up_to_k(
        &candidates,
        policy.k,
        T::lit(policy.tau_lo),
        T::lit(policy.tau_hi),
    )?;
    let stage2 = start.elapsed();

    Ok((
        selected,
        RetrievalTiming {
            stage1_secs: stage1.as_secs_f64(),
            stage2_secs: stage2.as_secs_f64(),
            scored_count: items.len(),
        },
    ))
}

/// Scores every corpus entry with the relevancy scorer, then applies
/// up-to-k selection.
pub fn direct_retrieve<T: Scalar, S: Scorer<T> + ?Sized>(
    store: &VectorStore<T>,
    scorer: &S,
    query_text: &str,
    policy: &SelectionPolicy,
) -> Result<(Vec<ScoredCandidate<T>>, RetrievalTiming)> {
    require_method(policy, Method::DirectRs)?;
    require_calibrated(scorer)?;

    let start = Instant::now();
    let items: Vec<ScoreItem> = store
        .entries()
        .iter()
        .map(|e| ScoreItem::new(e.id.clone(), e.payload_ref.clone()))
        .collect();
    let scores = scorer.score_batch(query_text, &items)?;
    let candidates: Vec<ScoredCandidate<T>> = items
        .into_iter()
        .zip(scores)
        .map(|(item, rs)| ScoredCandidate::new(item.entry_id, rs))
        .collect();
    let selected = select_up_to_k(
        &candidates,
        policy.k,
        T::lit(policy.tau_lo),
        T::lit(policy.tau_hi),
    )?;
    let stage2 = start.elapsed();

    Ok((
        selected,
        RetrievalTiming {
            stage1_secs: 0.0,
            stage2_secs: stage2.as_secs_f64(),
            scored_count: candidates.len(),
        },
    ))
}

/// Stage-1-only baseline: the `k` entries with highest cosine.
///
/// When `annotator` is given, the selected entries are scored with it so the
/// baseline can be evaluated on the same relevancy scale. That scoring is not
/// part of retrieval and is excluded from the timing and `scored_count`.
pub fn top_k_clip_retrieve<T: Scalar, S: Scorer<T> + ?Sized>(
    store: &VectorStore<T>,
    annotator: Option<&S>,
    query_text: &str,
    query_embedding: &Embedding<T>,
    policy: &SelectionPolicy,
) -> Result<(Vec<ScoredCandidate<T>>, RetrievalTiming)> {
    require_method(policy, Method::TopKClip)?;

    let start = Instant::now();
    let hits = store.top_l(query_embedding, policy.k)?;
    let candidates: Vec<ScoredCandidate<T>> = hits
        .into_iter()
        .map(|hit| ScoredCandidate {
            entry_id: hit.entry_id,
            clip_score: Some(hit.clip_score),
            rs: T::zero(),
            clip_rank: Some(hit.rank),
            final_rank: 0,
        })
        .collect();
    let mut selected = select_top_k(&candidates, policy.k, RankBy::Clip);
    let stage1 = start.elapsed();

    if let Some(scorer) = annotator {
        let ids: Vec<&str> = selected.iter().map(|c| c.entry_id.as_str()).collect();
        let items = score_items(store, &ids)?;
        let scores = scorer.score_batch(query_text, &items)?;
        for (c, rs) in selected.iter_mut().zip(scores) {
            c.rs = rs;
        }
    }

    Ok((
        selected,
        RetrievalTiming {
            stage1_secs: stage1.as_secs_f64(),
            stage2_secs: 0.0,
            scored_count: 0,
        },
    ))
}

/// Dispatches on `policy.method`. Stage-1 methods need `query_embedding`.
pub fn retrieve<T: Scalar, S: Scorer<T> + ?Sized>(
    store: &VectorStore<T>,
    scorer: &S,
    query_text: &str,
    query_embedding: Option<&Embedding<T>>,
    policy: &SelectionPolicy,
) -> Result<(Vec<ScoredCandidate<T>>, RetrievalTiming)> {
    let need_embedding = || {
        query_embedding.ok_or_else(|| {
            Error::InvalidArgument(format!("{} requires a query embedding", policy.label()))
        })
    };
    match policy.method {
        Method::TopKClip => {
            top_k_clip_retrieve(store, Some(scorer), query_text, need_embedding()?, policy)
        }
        Method::DirectRs => direct_retrieve(store, scorer, query_text, policy),
        Method::Rerank => two_stage_retrieve(store, scorer, query_text, need_embedding()?, policy),
    }
}

fn median_duration(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// Runs [`retrieve`] once as warm-up and then `repetitions` more times,
/// reporting per-stage median wall-clock times. Selection output is the same
/// on every run for deterministic scorers; the last one is returned.
pub fn retrieve_timed<T: Scalar, S: Scorer<T> + ?Sized>(
    store: &VectorStore<T>,
    scorer: &S,
    query_text: &str,
    query_embedding: Option<&Embedding<T>>,
    policy: &SelectionPolicy,
    repetitions: usize,
) -> Result<(Vec<ScoredCandidate<T>>, RetrievalTiming)> {
    let mut last = retrieve(store, scorer, query_text, query_embedding, policy)?;
    let reps = repetitions.max(1);
    let mut s1 = Vec::with_capacity(reps);
    let mut s2 = Vec::with_capacity(reps);
    for _ in 0..reps {
        last = retrieve(store, scorer, query_text, query_embedding, policy)?;
        s1.push(Duration::from_secs_f64(last.1.stage1_secs));
        s2.push(Duration::from_secs_f64(last.1.stage2_secs));
    }
    last.1.stage1_secs = median_duration(s1).as_secs_f64();
    last.1.stage2_secs = median_duration(s2).as_secs_f64();
    Ok(last)
}
