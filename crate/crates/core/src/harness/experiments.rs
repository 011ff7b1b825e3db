//! The three experiment pipelines: scorer separation, retrieval relevancy,
//! and end-to-end confidence.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{EvalTriplet, QueryRecord};
use super::report::{
    digest_of, ExperimentKind, ExperimentReport, MethodReport, Provenance, QueryOutcome,
    SeparationDetail, TimingSummary,
};
use super::responder::{ContextItem, CorrectnessScorer, Responder};
use crate::analytics::{
    accuracy_sweep, avg_score_by_rank, confidence, default_range, default_thresholds, histogram,
    js_distance, mean_separation, rerank_cost_factor, CostModelParams, DEFAULT_BINS,
    REFERENCE_RHO,
};
use crate::error::{Error, Result};
use crate::rerank::{
    retrieve, retrieve_timed, Method, RetrievalTiming, ScoredCandidate, SelectionPolicy,
    DEFAULT_TIMING_REPETITIONS,
};
use crate::scorers::{require_calibrated, ScoreRequest, Scorer};
use crate::store::VectorStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub seed: u64,
    pub bins: usize,
    /// Histogram range; defaults from the scorer's calibration.
    pub range: Option<(f64, f64)>,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            bins: DEFAULT_BINS,
            range: None,
        }
    }
}

/// Scores each triplet's positive and negative statement against its item
/// and measures how well the two score distributions separate.
pub fn run_separation_experiment(
    triplets: &[EvalTriplet],
    scorer: &dyn Scorer<f64>,
    config: &SeparationConfig,
) -> Result<ExperimentReport> {
    if triplets.is_empty() {
        return Err(Error::Empty("no triplets"));
    }
    let pairs: Vec<(f64, f64)> = triplets
        .par_iter()
        .map(|t| {
            let score = |statement: &str| {
                scorer.score(&ScoreRequest::new(statement, &t.item_id, &t.payload_ref))
            };
            Ok((score(&t.positive)?, score(&t.negative)?))
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .zip(triplets)
        .map(|(r, t)| r.map_err(|e: Error| e.context(format!("triplet {}", t.item_id))))
        .collect::<Result<_>>()?;
    let (pos, neg): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();

    let descriptor = scorer.descriptor();
    let range = config
        .range
        .unwrap_or_else(|| default_range(descriptor.calibrated));
    let pos_hist = histogram(&pos, config.bins, range)?;
    let neg_hist = histogram(&neg, config.bins, range)?;
    let jsd = js_distance(&pos_hist, &neg_hist)?;
    let separation = mean_separation(&pos, &neg)?;
    let (curve, best) = accuracy_sweep(&pos, &neg, &default_thresholds())?;

    let mut m = MethodReport::new(descriptor.name.clone(), descriptor.name.clone());
    m.set("mean_separation", separation);
    m.set("jsd", jsd);
    m.set("best_accuracy", best.accuracy);
    m.set("best_threshold", best.threshold);
    m.set("positive_mean", pos.iter().sum::<f64>() / pos.len() as f64);
    m.set("negative_mean", neg.iter().sum::<f64>() / neg.len() as f64);
    m.scored_pairs = (pos.len() + neg.len()) as u64;
    m.separation = Some(SeparationDetail {
        positive_histogram: pos_hist,
        negative_histogram: neg_hist,
        accuracy_curve: curve,
        best,
    });

    let mut digests = BTreeMap::new();
    digests.insert("triplets".to_owned(), digest_of(triplets)?);
    Ok(ExperimentReport {
        experiment: ExperimentKind::Separation,
        config: serde_json::to_value(config)?,
        methods: vec![m],
        notes: vec!["classification rule: score >= threshold is relevant".into()],
        provenance: Provenance::new(config.seed, digests),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub seed: u64,
    /// Output positions evaluated (the "@5" in avg-RS@5).
    pub depth: usize,
    /// Wall-clock measurement makes reports run-dependent, so it is opt-in.
    pub measure_timing: bool,
    pub timing_repetitions: usize,
    /// Cost-model slowdown of full-corpus relevancy scoring.
    pub rho: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            depth: 5,
            measure_timing: false,
            timing_repetitions: DEFAULT_TIMING_REPETITIONS,
            rho: REFERENCE_RHO,
        }
    }
}

type QueryRun = (Vec<ScoredCandidate<f64>>, RetrievalTiming);

fn check_queries(store: &VectorStore<f64>, queries: &[QueryRecord<f64>]) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::Empty("no queries"));
    }
    for q in queries {
        if let Some(e) = &q.embedding {
            if e.dim() != store.dim() {
                return Err(Error::DimensionMismatch {
                    expected: store.dim(),
                    found: e.dim(),
                }
                .context(format!("query {}", q.query_id)));
            }
        }
    }
    Ok(())
}

fn run_policy(
    store: &VectorStore<f64>,
    queries: &[QueryRecord<f64>],
    policy: &SelectionPolicy,
    scorer: &dyn Scorer<f64>,
    timing_reps: Option<usize>,
) -> Vec<Result<QueryRun>> {
    let one = |q: &QueryRecord<f64>| {
        let emb = q.embedding.as_ref();
        match timing_reps {
            Some(reps) => retrieve_timed(store, scorer, &q.text, emb, policy, reps),
            None => retrieve(store, scorer, &q.text, emb, policy),
        }
        .map_err(|e| e.context(format!("query {}", q.query_id)))
    };
    if timing_reps.is_some() {
        // Sequential so measurements are not skewed by contention.
        queries.iter().map(one).collect()
    } else {
        queries.par_iter().map(one).collect()
    }
}

fn rank_scalars(m: &mut MethodReport, runs: &[Vec<f64>], depth: usize) -> Result<()> {
    let profile = avg_score_by_rank(runs, depth)?;
    for p in 0..depth {
        m.set(&format!("avg_rs_rank{}", p + 1), profile.mean[p]);
        m.set(&format!("fill_rank{}", p + 1), profile.fill_rate[p]);
    }
    m.set("mean_avg_rs", profile.overall());
    // Empty slots count as zero relevancy here.
    let filled: f64 = profile
        .mean
        .iter()
        .zip(&profile.fill_rate)
        .map(|(m, f)| m.unwrap_or(0.0) * f)
        .sum();
    m.set("mean_rs_at_depth", filled / depth as f64);
    m.set(
        "mean_selected",
        runs.iter().map(Vec::len).sum::<usize>() as f64 / runs.len() as f64,
    );
    m.rank_profile = Some(profile);
    Ok(())
}

fn precision_recall(m: &mut MethodReport, queries: &[QueryRecord<f64>], runs: &[QueryRun]) {
    let mut selected = 0usize;
    let mut hits = 0usize;
    let mut relevant = 0usize;
    for (q, (sel, _)) in queries.iter().zip(runs) {
        let Some(truth) = &q.relevant_ids else { return };
        relevant += truth.len();
        selected += sel.len();
        hits += sel.iter().filter(|c| truth.contains(&c.entry_id)).count();
    }
    m.set("precision", (selected > 0).then(|| hits as f64 / selected as f64));
    m.set("recall", (relevant > 0).then(|| hits as f64 / relevant as f64));
}

fn model_cost(policy: &SelectionPolicy, params: &CostModelParams) -> f64 {
    match policy.method {
        Method::TopKClip => 1.0,
        Method::DirectRs => crate::analytics::direct_cost_factor(params),
        Method::Rerank => rerank_cost_factor(policy.l.min(params.corpus_size), params),
    }
}

fn fill_slowdowns(methods: &mut [MethodReport]) {
    let base = methods
        .iter()
        .find(|m| m.policy.is_some_and(|p| p.method == Method::TopKClip))
        .and_then(|m| m.timing.as_ref())
        .map(|t| t.stage1_secs + t.stage2_secs);
    if let Some(base) = base.filter(|b| *b > 0.0) {
        for m in methods {
            let Some(t) = &mut m.timing else { continue };
            let slowdown = (t.stage1_secs + t.stage2_secs) / base;
            t.slowdown_vs_top_k_clip = Some(slowdown);
            m.set("measured_slowdown", slowdown);
        }
    }
}

fn dataset_digests(
    store: &VectorStore<f64>,
    queries: &[QueryRecord<f64>],
) -> Result<BTreeMap<String, String>> {
    let mut d = BTreeMap::new();
    d.insert("corpus".to_owned(), digest_of(store.entries())?);
    d.insert("queries".to_owned(), digest_of(queries)?);
    Ok(d)
}

/// Runs every policy on every query and reports per-rank relevancy (scored
/// with `rs_scorer`, also for the cosine baseline), scorer call counts and
/// modeled cost factors.
pub fn run_retrieval_experiment(
    store: &VectorStore<f64>,
    queries: &[QueryRecord<f64>],
    policies: &[SelectionPolicy],
    rs_scorer: &dyn Scorer<f64>,
    config: &RetrievalConfig,
) -> Result<ExperimentReport> {
    if policies.is_empty() {
        return Err(Error::Empty("no policies"));
    }
    require_calibrated(rs_scorer)?;
    check_queries(store, queries)?;
    let cost = CostModelParams::new(config.rho, store.len())?;
    let timing_reps = config.measure_timing.then_some(config.timing_repetitions);

    let mut methods = Vec::with_capacity(policies.len());
    for policy in policies {
        policy.validate()?;
        let runs: Vec<QueryRun> = run_policy(store, queries, policy, rs_scorer, timing_reps)
            .into_iter()
            .collect::<Result<_>>()
            .map_err(|e| e.context(policy.label()))?;

        let mut m = MethodReport::new(policy.label(), rs_scorer.descriptor().name.clone());
        m.policy = Some(*policy);
        let rs_runs: Vec<Vec<f64>> = runs
            .iter()
            .map(|(sel, _)| sel.iter().map(|c| c.rs).collect())
            .collect();
        rank_scalars(&mut m, &rs_runs, config.depth)?;
        precision_recall(&mut m, queries, &runs);
        m.set("model_cost_factor", model_cost(policy, &cost));
        let max_scored = runs.iter().map(|(_, t)| t.scored_count).max().unwrap_or(0);
        m.set("max_scored_per_query", max_scored as f64);
        m.scored_pairs = runs.iter().map(|(_, t)| t.scored_count as u64).sum();
        if let Some(reps) = timing_reps {
            m.timing = Some(TimingSummary {
                repetitions: reps,
                stage1_secs: runs.iter().map(|(_, t)| t.stage1_secs).sum(),
                stage2_secs: runs.iter().map(|(_, t)| t.stage2_secs).sum(),
                slowdown_vs_top_k_clip: None,
            });
        }
        m.queries = queries
            .iter()
            .zip(runs)
            .map(|(q, (sel, t))| QueryOutcome {
                query_id: q.query_id.clone(),
                rs: sel.iter().map(|c| c.rs).collect(),
                selected: sel.into_iter().map(|c| c.entry_id).collect(),
                scored_count: t.scored_count,
                cs: None,
                confidence: None,
                error: None,
            })
            .collect();
        methods.push(m);
    }
    fill_slowdowns(&mut methods);

    Ok(ExperimentReport {
        experiment: ExperimentKind::Retrieval,
        config: serde_json::to_value(config)?,
        methods,
        notes: vec![
            "avg_rs_rank<p> averages over queries that selected at least p entries".into(),
            "mean_rs_at_depth counts empty output slots as zero relevancy".into(),
            "cosine baseline entries are scored with the relevancy scorer for evaluation only"
                .into(),
        ],
        provenance: Provenance::new(config.seed, dataset_digests(store, queries)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndConfig {
    pub seed: u64,
}

/// Retrieves context, generates a response, and scores it with the
/// confidence score: the geometric mean of the response's correctness and
/// the context's mean relevancy. Per-query failures are recorded and
/// counted; the run continues.
pub fn run_e2e_experiment(
    store: &VectorStore<f64>,
    queries: &[QueryRecord<f64>],
    policies: &[SelectionPolicy],
    rs_scorer: &dyn Scorer<f64>,
    responder: &dyn Responder,
    cs_scorer: &dyn CorrectnessScorer,
    config: &EndToEndConfig,
) -> Result<ExperimentReport> {
    if policies.is_empty() {
        return Err(Error::Empty("no policies"));
    }
    require_calibrated(rs_scorer)?;
    check_queries(store, queries)?;

    let mut methods = Vec::with_capacity(policies.len());
    for policy in policies {
        policy.validate()?;
        let outcomes: Vec<QueryOutcome> = queries
            .par_iter()
            .map(|q| e2e_query(store, q, policy, rs_scorer, responder, cs_scorer))
            .collect();

        let mut m = MethodReport::new(policy.label(), rs_scorer.descriptor().name.clone());
        m.policy = Some(*policy);
        let ok: Vec<&QueryOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let confidences: Vec<f64> = ok.iter().filter_map(|o| o.confidence).collect();
        let css: Vec<f64> = ok.iter().filter_map(|o| o.cs).collect();
        let ctx_rs: Vec<f64> = ok
            .iter()
            .filter(|o| !o.rs.is_empty())
            .map(|o| o.rs.iter().sum::<f64>() / o.rs.len() as f64)
            .collect();
        m.set("mean_confidence", mean(&confidences));
        m.set("mean_cs", mean(&css));
        m.set("mean_context_rs", mean(&ctx_rs));
        m.set("failures", (outcomes.len() - ok.len()) as f64);
        m.set(
            "empty_contexts",
            ok.iter().filter(|o| o.selected.is_empty()).count() as f64,
        );
        m.scored_pairs = outcomes.iter().map(|o| o.scored_count as u64).sum();
        m.queries = outcomes;
        methods.push(m);
    }

    let mut cfg = serde_json::to_value(config)?;
    cfg["responder"] = responder.label().into();
    cfg["cs_scorer"] = cs_scorer.name().into();
    Ok(ExperimentReport {
        experiment: ExperimentKind::EndToEnd,
        config: cfg,
        methods,
        notes: vec![
            "context relevancy is the arithmetic mean of the selected entries' scores".into(),
            "an empty context yields confidence 0".into(),
        ],
        provenance: Provenance::new(config.seed, dataset_digests(store, queries)?),
    })
}

fn e2e_query(
    store: &VectorStore<f64>,
    q: &QueryRecord<f64>,
    policy: &SelectionPolicy,
    rs_scorer: &dyn Scorer<f64>,
    responder: &dyn Responder,
    cs_scorer: &dyn CorrectnessScorer,
) -> QueryOutcome {
    let mut out = QueryOutcome {
        query_id: q.query_id.clone(),
        selected: Vec::new(),
        rs: Vec::new(),
        scored_count: 0,
        cs: None,
        confidence: None,
        error: None,
    };
    let (selected, timing) = match retrieve(store, rs_scorer, &q.text, q.embedding.as_ref(), policy) {
        Ok(r) => r,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.scored_count = timing.scored_count;
    out.selected = selected.iter().map(|c| c.entry_id.clone()).collect();
    out.rs = selected.iter().map(|c| c.rs).collect();
    if selected.is_empty() {
        out.confidence = Some(0.0);
        return out;
    }
    let context: Vec<ContextItem> = selected
        .iter()
        .map(|c| ContextItem {
            entry_id: c.entry_id.clone(),
            payload_ref: store
                .get(&c.entry_id)
                .map(|e| e.payload_ref.clone())
                .unwrap_or_default(),
            rs: c.rs,
        })
        .collect();
    let context_rs = out.rs.iter().sum::<f64>() / out.rs.len() as f64;
    let result = responder
        .respond(q, &context)
        .and_then(|response| cs_scorer.score(q, &response, &context))
        .and_then(|cs| confidence(cs, context_rs).map(|c| (cs, c)));
    match result {
        Ok((cs, c)) => {
            out.cs = Some(cs);
            out.confidence = Some(c);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

