//! Experiment reports and their JSON / CSV serializations.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{AccuracyCurve, BestThreshold, RankProfile, ScoreHistogram};
use crate::error::{Error, Result};
use crate::rerank::SelectionPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Separation,
    Retrieval,
    EndToEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: serde_json::Value,
    pub methods: Vec<MethodReport>,
    /// Warnings and conventions worth surfacing next to the numbers.
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn method(&self, label: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 of each input dataset's canonical JSON form.
    pub dataset_digests: BTreeMap<String, String>,
    pub tool_version: String,
    /// Seconds since the Unix epoch. The only field that varies between
    /// otherwise identical runs.
    pub timestamp: u64,
}

impl Provenance {
    pub fn new(seed: u64, dataset_digests: BTreeMap<String, String>) -> Self {
        Self {
            seed,
            dataset_digests,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

pub fn digest_of<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Results for one method (a selection policy, or a scorer in separation runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub scorer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<SelectionPolicy>,
    /// Flat named metrics; `None` marks an undefined value (e.g. a rank no
    /// query reached).
    pub scalars: BTreeMap<String, Option<f64>>,
    /// Scorer evaluations made by this method.
    pub scored_pairs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<SeparationDetail>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_profile: Option<RankProfile<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<QueryOutcome>,
}

impl MethodReport {
    pub fn new(method: impl Into<String>, scorer: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            scorer: scorer.into(),
            policy: None,
            scalars: BTreeMap::new(),
            scored_pairs: 0,
            separation: None,
            rank_profile: None,
            timing: None,
            queries: Vec::new(),
        }
    }

    pub fn set(&mut self, metric: &str, value: impl Into<Option<f64>>) {
        self.scalars.insert(metric.to_owned(), value.into());
    }

    /// The metric's value; `None` if absent or undefined.
    pub fn scalar(&self, metric: &str) -> Option<f64> {
        self.scalars.get(metric).copied().flatten()
    }
}

/// Raw vectors behind the histogram and threshold plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationDetail {
    pub positive_histogram: ScoreHistogram<f64>,
    pub negative_histogram: ScoreHistogram<f64>,
    pub accuracy_curve: AccuracyCurve<f64>,
    pub best: BestThreshold<f64>,
}

/// Measured wall-clock costs, summed over queries of per-query medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub repetitions: usize,
    pub stage1_secs: f64,
    pub stage2_secs: f64,
    /// Total time relative to the cosine-only baseline, when one ran.
    pub slowdown_vs_top_k_clip: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_id: String,
    pub selected: Vec<String>,
    pub rs: Vec<f64>,
    pub scored_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

/// One `method,metric,value` row per scalar; undefined values are empty.
pub fn write_csv(report: &ExperimentReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "metric", "value"])?;
    for m in &report.methods {
        for (metric, value) in &m.scalars {
            let v = value.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([m.method.as_str(), metric.as_str(), v.as_str()])?;
        }
        w.write_record([m.method.as_str(), "scored_pairs", &m.scored_pairs.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let mut out = BufWriter::new(file);
    match format {
        ReportFormat::Json => {
            out.write_all(report.to_json()?.as_bytes())?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Csv => write_csv(report, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut m = MethodReport::new("rerank_l20", "planted:1");
        m.set("avg_rs_rank1", 0.875);
        m.set("avg_rs_rank5", None);
        m.scored_pairs = 40;
        ExperimentReport {
            experiment: ExperimentKind::Retrieval,
            config: serde_json::json!({"k": 5}),
            methods: vec![m],
            notes: vec![],
            provenance: Provenance::new(1, BTreeMap::new()),
        }
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let back = ExperimentReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        write_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,metric,value\n"));
        assert!(text.contains("rerank_l20,avg_rs_rank1,0.875\n"));
        assert!(text.contains("rerank_l20,avg_rs_rank5,\n"));
        assert!(text.contains("rerank_l20,scored_pairs,40\n"));
    }

    #[test]
    fn format_parse() {
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }

    #[test]
    fn unwritable_path() {
        let err = emit_report(
            &sample(),
            Path::new("/nonexistent-dir/report.json"),
            ReportFormat::Json,
        );
        assert!(err.is_err());
    }
}
