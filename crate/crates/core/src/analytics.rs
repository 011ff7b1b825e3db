//! Score-distribution instruments: histograms, mean separation,
//! Jensen-Shannon distance, threshold accuracy sweeps, the confidence score,
//! per-rank relevancy averages and the re-ranking cost model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_BINS: usize = 50;
/// Threshold grid resolution used by [`default_thresholds`].
pub const DEFAULT_THRESHOLD_STEP: f64 = 0.005;

/// Slowdown of scoring the whole corpus with the relevancy model instead of
/// a cosine scan.
pub const REFERENCE_RHO: f64 = 35.0;
pub const REFERENCE_CORPUS_SIZE: usize = 1281;

/// Histogram range: `[0, 1]` for calibrated scorers, `[-1, 1]` otherwise.
pub fn default_range<T: Scalar>(calibrated: bool) -> (T, T) {
    if calibrated {
        (T::zero(), T::one())
    } else {
        (-T::one(), T::one())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram<T> {
    pub bin_edges: Vec<T>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl<T: Scalar> ScoreHistogram<T> {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Counts normalized to sum to one.
    pub fn probabilities(&self) -> Vec<T> {
        let total = T::lit(self.total as f64);
        self.counts
            .iter()
            .map(|&c| T::lit(c as f64) / total)
            .collect()
    }
}

/// Uniform-bin histogram over `range`. Bins are half-open except the last,
/// which is closed; scores outside the range are counted in the nearest
/// boundary bin.
pub fn histogram<T: Scalar>(scores: &[T], bins: usize, range: (T, T)) -> Result<ScoreHistogram<T>> {
    let (lo, hi) = range;
    if scores.is_empty() {
        return Err(Error::Empty("no scores to histogram"));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid range [{lo}, {hi}]")));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let nb = T::from_count(bins);
    let width = hi - lo;
    let bin_edges = (0..=bins)
        .map(|i| lo + width * T::from_count(i) / nb)
        .collect();
    let mut counts = vec![0u64; bins];
    for &s in scores {
        let pos = ((s - lo) / width * nb).floor();
        let idx = if pos < T::zero() {
            0
        } else {
            pos.to_usize().unwrap_or(bins).min(bins - 1)
        };
        counts[idx] += 1;
    }
    Ok(ScoreHistogram {
        bin_edges,
        counts,
        total: scores.len() as u64,
    })
}

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_count(v.len())
}

/// `|mean(pos) - mean(neg)|`.
pub fn mean_separation<T: Scalar>(pos: &[T], neg: &[T]) -> Result<T> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Empty("mean separation needs both score sets"));
    }
    Ok((mean(pos) - mean(neg)).abs())
}

fn kl_to_mixture<T: Scalar>(p: &[T], m: &[T]) -> T {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > T::zero())
        .map(|(&pi, &mi)| pi * (pi / mi).ln())
        .sum()
}

/// Jensen-Shannon distance between two probability vectors, natural log.
/// Bounded by `sqrt(ln 2)`.
pub fn js_distance_probs<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::Empty("empty distribution"));
    }
    let half = T::lit(0.5);
    let m: Vec<T> = p.iter().zip(q).map(|(&a, &b)| (a + b) * half).collect();
    let div = (kl_to_mixture(p, &m) + kl_to_mixture(q, &m)) * half;
    // Rounding can leave a tiny negative for identical inputs.
    Ok(div.max(T::zero()).sqrt())
}

/// Jensen-Shannon distance between two histograms sharing bin edges.
pub fn js_distance<T: Scalar>(p: &ScoreHistogram<T>, q: &ScoreHistogram<T>) -> Result<T> {
    if p.bin_edges != q.bin_edges {
        return Err(Error::InvalidArgument("histogram bin edges differ".into()));
    }
    if p.total == 0 || q.total == 0 {
        return Err(Error::Empty("histogram has no samples"));
    }
    js_distance_probs(&p.probabilities(), &q.probabilities())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve<T> {
    pub thresholds: Vec<T>,
    /// Fraction of relevant scores `>= t` (one minus their CDF).
    pub pos_kept: Vec<T>,
    /// Fraction of irrelevant scores `< t` (their CDF).
    pub neg_rejected: Vec<T>,
    pub accuracy: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestThreshold<T> {
    pub threshold: T,
    pub accuracy: T,
}

/// `0, 0.005, ..., 1`.
pub fn default_thresholds<T: Scalar>() -> Vec<T> {
    let steps = (1.0 / DEFAULT_THRESHOLD_STEP).round() as usize;
    (0..=steps)
        .map(|i| T::from_count(i) / T::from_count(steps))
        .collect()
}

fn sorted<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Balanced accuracy of the rule `score >= t => relevant` at each threshold,
/// with the best point (ties go to the smallest threshold).
pub fn accuracy_sweep<T: Scalar>(
    pos: &[T],
    neg: &[T],
    thresholds: &[T],
) -> Result<(AccuracyCurve<T>, BestThreshold<T>)> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Empty("accuracy sweep needs both score sets"));
    }
    if thresholds.is_empty() {
        return Err(Error::Empty("no thresholds"));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("thresholds must be ascending".into()));
    }
    let pos = sorted(pos);
    let neg = sorted(neg);
    let (np, nn) = (T::from_count(pos.len()), T::from_count(neg.len()));
    let half = T::lit(0.5);

    let mut curve = AccuracyCurve {
        thresholds: thresholds.to_vec(),
        pos_kept: Vec::with_capacity(thresholds.len()),
        neg_rejected: Vec::with_capacity(thresholds.len()),
        accuracy: Vec::with_capacity(thresholds.len()),
    };
    let mut best: Option<BestThreshold<T>> = None;
    for &t in thresholds {
        let pos_below = pos.partition_point(|&x| x < t);
        let neg_below = neg.partition_point(|&x| x < t);
        let kept = T::from_count(pos.len() - pos_below) / np;
        let rejected = T::from_count(neg_below) / nn;
        let acc = (kept + rejected) * half;
        curve.pos_kept.push(kept);
        curve.neg_rejected.push(rejected);
        curve.accuracy.push(acc);
        if best.is_none_or(|b| acc > b.accuracy) {
            best = Some(BestThreshold {
                threshold: t,
                accuracy: acc,
            });
        }
    }
    Ok((curve, best.expect("thresholds non-empty")))
}

/// Geometric mean of correctness and relevancy scores.
pub fn confidence<T: Scalar>(cs: T, rs: T) -> Result<T> {
    for (name, v) in [("cs", cs), ("rs", rs)] {
        if !v.in_unit_interval() {
            return Err(Error::InvalidArgument(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    Ok((cs * rs).sqrt())
}

/// Mean relevancy at each output position across queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProfile<T> {
    /// `mean[p]` averages position `p + 1` over runs that reached it; `None`
    /// when no run did.
    pub mean: Vec<Option<T>>,
    /// Fraction of runs with at least `p + 1` entries.
    pub fill_rate: Vec<T>,
}

impl<T: Scalar> RankProfile<T> {
    /// Average of the present per-position means.
    pub fn overall(&self) -> Option<T> {
        let present: Vec<T> = self.mean.iter().flatten().copied().collect();
        (!present.is_empty()).then(|| mean(&present))
    }
}

pub fn avg_score_by_rank<T: Scalar>(runs: &[Vec<T>], depth: usize) -> Result<RankProfile<T>> {
    if runs.is_empty() {
        return Err(Error::Empty("no runs"));
    }
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let n = T::from_count(runs.len());
    let mut profile = RankProfile {
        mean: Vec::with_capacity(depth),
        fill_rate: Vec::with_capacity(depth),
    };
    for p in 0..depth {
        let at_p: Vec<T> = runs.iter().filter_map(|r| r.get(p).copied()).collect();
        profile.fill_rate.push(T::from_count(at_p.len()) / n);
        profile.mean.push((!at_p.is_empty()).then(|| mean(&at_p)));
    }
    Ok(profile)
}

/// Parameters of the re-ranking cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    /// Full-corpus relevancy scoring time relative to a cosine scan.
    pub rho: f64,
    pub corpus_size: usize,
}

impl Default for CostModelParams {
    fn default() -> Self {
        Self {
            rho: REFERENCE_RHO,
            corpus_size: REFERENCE_CORPUS_SIZE,
        }
    }
}

impl CostModelParams {
    pub fn new(rho: f64, corpus_size: usize) -> Result<Self> {
        let p = Self { rho, corpus_size };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if self.corpus_size == 0 {
            return Err(Error::InvalidArgument("corpus size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Modeled retrieval time of re-ranking `l` candidates relative to the
/// cosine scan alone: `1 + l * rho / corpus_size`.
pub fn rerank_cost_factor<T: Scalar>(l: usize, params: &CostModelParams) -> T {
    T::one() + T::from_count(l) * T::lit(params.rho) / T::from_count(params.corpus_size)
}

/// Modeled slowdown of scoring the whole corpus directly.
pub fn direct_cost_factor<T: Scalar>(params: &CostModelParams) -> T {
    T::lit(params.rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.1, 0.9], 2, (0.0, 1.0)).unwrap();
        assert_eq!(h.counts, [1, 1]);
        assert_eq!(h.bin_edges, [0.0, 0.5, 1.0]);

        let h = histogram(&[0.5; 10], 10, (0.0, 1.0)).unwrap();
        assert_eq!(h.counts[5], 10);
        assert_eq!(h.total, 10);
    }

    #[test]
    fn histogram_clamps_and_closes_right() {
        let h = histogram(&[-3.0, 1.0, 7.0, 0.0], 4, (0.0, 1.0)).unwrap();
        assert_eq!(h.counts, [2, 0, 0, 2]);
        assert!(histogram::<f64>(&[], 4, (0.0, 1.0)).is_err());
        assert!(histogram(&[0.5], 0, (0.0, 1.0)).is_err());
        assert!(histogram(&[0.5], 4, (1.0, 1.0)).is_err());
        assert!(histogram(&[f64::NAN], 4, (0.0, 1.0)).is_err());
    }

    #[test]
    fn mean_separation_examples() {
        assert_eq!(mean_separation(&[0.3, 0.5], &[0.3, 0.5]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            mean_separation(&[0.8, 0.6], &[0.2, 0.4]).unwrap(),
            0.4,
            epsilon = 1e-12
        );
        assert!(mean_separation::<f64>(&[], &[0.1]).is_err());
    }

    #[test]
    fn jsd_examples() {
        assert_eq!(js_distance_probs(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            js_distance_probs(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            std::f64::consts::LN_2.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            js_distance_probs(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            0.4645,
            epsilon = 1e-3
        );
    }

    #[test]
    fn jsd_requires_matching_edges() {
        let a = histogram(&[0.1], 2, (0.0, 1.0)).unwrap();
        let b = histogram(&[0.1], 4, (0.0, 1.0)).unwrap();
        assert!(js_distance(&a, &b).is_err());
    }

    #[test]
    fn sweep_separated() {
        let (curve, best) =
            accuracy_sweep(&[0.9, 0.8], &[0.1, 0.2], &default_thresholds::<f64>()).unwrap();
        assert_eq!(best.accuracy, 1.0);
        assert_abs_diff_eq!(best.threshold, 0.205, epsilon = 1e-12);
        assert_eq!(curve.thresholds.len(), 201);
        for i in 0..curve.accuracy.len() {
            assert_eq!(
                curve.accuracy[i],
                (curve.pos_kept[i] + curve.neg_rejected[i]) / 2.0
            );
        }
    }

    #[test]
    fn sweep_identical_sets() {
        let s = [0.2, 0.4, 0.6];
        let (curve, best) = accuracy_sweep(&s, &s, &default_thresholds::<f64>()).unwrap();
        assert!(curve.accuracy.iter().all(|&a| (a - 0.5).abs() < 1e-12));
        assert_eq!(best.threshold, 0.0);
    }

    #[test]
    fn sweep_errors() {
        assert!(accuracy_sweep(&[0.1], &[0.2], &[]).is_err());
        assert!(accuracy_sweep(&[0.1], &[0.2], &[0.5, 0.4]).is_err());
        assert!(accuracy_sweep::<f64>(&[], &[0.2], &[0.5]).is_err());
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(confidence(0.0, 0.9).unwrap(), 0.0);
        assert_abs_diff_eq!(confidence(0.5, 0.8).unwrap(), 0.63246, epsilon = 1e-5);
        assert!(confidence(1.1, 0.5).is_err());
    }

    #[test]
    fn rank_profile_examples() {
        let p = avg_score_by_rank(&[vec![0.9, 0.7]], 2).unwrap();
        assert_eq!(p.mean, [Some(0.9), Some(0.7)]);
        assert_eq!(p.fill_rate, [1.0, 1.0]);

        let p = avg_score_by_rank(&[vec![0.8], vec![0.6, 0.4]], 2).unwrap();
        assert_abs_diff_eq!(p.mean[0].unwrap(), 0.7, epsilon = 1e-12);
        assert_eq!(p.mean[1], Some(0.4));
        assert_eq!(p.fill_rate, [1.0, 0.5]);

        let p = avg_score_by_rank::<f64>(&[vec![], vec![]], 2).unwrap();
        assert_eq!(p.mean, [None, None]);
        assert_eq!(p.fill_rate, [0.0, 0.0]);
        assert_eq!(p.overall(), None);

        assert!(avg_score_by_rank::<f64>(&[], 2).is_err());
    }

    #[test]
    fn cost_model_examples() {
        let p = CostModelParams::default();
        let f20: f64 = rerank_cost_factor(20, &p);
        let f10: f64 = rerank_cost_factor(10, &p);
        assert_abs_diff_eq!(f20, 1.546, epsilon = 5e-4);
        assert_abs_diff_eq!(f10, 1.273, epsilon = 5e-4);
        assert_eq!(rerank_cost_factor::<f64>(0, &p), 1.0);
        assert_eq!(direct_cost_factor::<f64>(&p), 35.0);
        assert!(CostModelParams::new(0.0, 10).is_err());
        assert!(CostModelParams::new(1.0, 0).is_err());
    }
}
