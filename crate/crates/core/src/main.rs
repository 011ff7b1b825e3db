use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmrerank::analytics::{direct_cost_factor, rerank_cost_factor, CostModelParams};
use mmrerank::harness::{
    self, emit_report, load_corpus, load_queries, load_triplets, relevance_from_queries,
    relevance_from_triplets, CorrectnessScorer, EchoResponder, EndToEndConfig, ExperimentReport,
    GroundedCorrectness, ReportFormat, Responder, RetrievalConfig, SeparationConfig, SynthSpec,
    TableCorrectness, TableResponder,
};
use mmrerank::rerank::{self, Method, SelectionPolicy};
use mmrerank::scorers::wire::EmbedItem;
use mmrerank::scorers::{
    NoisyClipScorer, PlantedScorer, RelevanceMap, RemoteScorer, Scorer, TableScorer,
};
use mmrerank::store::Modality;
use mmrerank::{Embedding, Error, ErrorKind, QueryRecord, Result, ScoreTable, VectorStore};

#[derive(Parser)]
#[command(name = "mmrerank", version, about = "Two-stage retrieval with relevancy re-ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and print a summary.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Retrieve context for one query.
    Retrieve(RetrieveArgs),
    /// Measure how well a scorer separates positive from negative statements.
    EvalScorer(EvalScorerArgs),
    /// Compare selection policies on a query set.
    EvalRetrieval(EvalRetrievalArgs),
    /// Retrieval, generation and confidence scoring end to end.
    EvalE2e(EvalE2eArgs),
    /// Print modeled retrieval slowdowns.
    CostModel {
        #[arg(long, default_value_t = 35.0)]
        rho: f64,
        #[arg(long, default_value_t = 1281)]
        corpus_size: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [10, 20])]
        l: Vec<usize>,
    },
    /// Write a seeded synthetic corpus, query set and triplet set.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Topk,
    Direct,
    Rerank,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

/// `table:<path>`, `remote:<url>`, `planted:<seed>` or
/// `clip-like:<seed>:<overlap>`.
#[derive(Clone, Debug)]
enum ScorerSpec {
    Table(PathBuf),
    Remote(String),
    Planted(u64),
    ClipLike(u64, f64),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("bad scorer {s:?}"))?;
        let seed = |v: &str| v.parse::<u64>().map_err(|e| format!("bad seed {v:?}: {e}"));
        match kind {
            "table" => Ok(ScorerSpec::Table(rest.into())),
            "remote" => Ok(ScorerSpec::Remote(rest.into())),
            "planted" => Ok(ScorerSpec::Planted(seed(rest)?)),
            "clip-like" => {
                let (s, o) = rest
                    .split_once(':')
                    .ok_or_else(|| "expected clip-like:<seed>:<overlap>".to_string())?;
                let overlap = o.parse::<f64>().map_err(|e| format!("bad overlap {o:?}: {e}"))?;
                Ok(ScorerSpec::ClipLike(seed(s)?, overlap))
            }
            other => Err(format!("unknown scorer kind {other:?}")),
        }
    }
}

impl ScorerSpec {
    fn build(&self, relevance: impl FnOnce() -> Result<RelevanceMap>) -> Result<Box<dyn Scorer<f64>>> {
        Ok(match self {
            ScorerSpec::Table(path) => {
                Box::new(TableScorer::new(format!("table:{}", path.display()), ScoreTable::read_file(path)?))
            }
            ScorerSpec::Remote(url) => Box::new(RemoteScorer::new(url)?),
            ScorerSpec::Planted(seed) => Box::new(PlantedScorer::new(*seed, relevance()?)),
            ScorerSpec::ClipLike(seed, overlap) => {
                Box::new(NoisyClipScorer::new(*seed, relevance()?, *overlap)?)
            }
        })
    }
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, default_value_t = rerank::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = rerank::DEFAULT_TAU_LO)]
    tau_lo: f64,
    #[arg(long, default_value_t = rerank::DEFAULT_TAU_HI)]
    tau_hi: f64,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    query: String,
    /// Query embedding as a JSON array.
    #[arg(long)]
    query_embedding: Option<String>,
    /// Query file; supplies the embedding (matched by text) and, for
    /// synthetic scorers, ground-truth relevance.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rerank")]
    method: MethodArg,
    #[arg(long, default_value_t = rerank::DEFAULT_L)]
    l: usize,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long)]
    scorer: ScorerSpec,
}

#[derive(Args)]
struct EvalScorerArgs {
    #[arg(long)]
    triplets: PathBuf,
    /// Repeat to compare scorers in one report.
    #[arg(long, required = true)]
    scorer: Vec<ScorerSpec>,
    #[arg(long, default_value_t = mmrerank::analytics::DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    scorer: ScorerSpec,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["topk", "rerank", "direct"])]
    methods: Vec<MethodArg>,
    /// Candidate counts for rerank; one policy per value.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20])]
    l: Vec<usize>,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct EvalRetrievalArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    #[arg(long, default_value_t = 5)]
    depth: usize,
    /// Measure wall-clock stage times (makes the report run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = rerank::DEFAULT_TIMING_REPETITIONS)]
    repetitions: usize,
    #[arg(long, default_value_t = 35.0)]
    rho: f64,
}

#[derive(Args)]
struct EvalE2eArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// `echo` or `table:<path>`.
    #[arg(long, default_value = "echo")]
    responder: String,
    /// `grounded` or `table:<path>`.
    #[arg(long, default_value = "grounded")]
    cs: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    corpus_size: usize,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 2000)]
    triplets: usize,
}

fn policies(methods: &[MethodArg], ls: &[usize], p: &PolicyArgs) -> Vec<SelectionPolicy> {
    let mut out = Vec::new();
    for m in methods {
        match m {
            MethodArg::Topk => out.push(SelectionPolicy::top_k_clip(p.k)),
            MethodArg::Direct => out.push(SelectionPolicy::direct_rs(p.k)),
            MethodArg::Rerank => out.extend(ls.iter().map(|&l| SelectionPolicy::rerank(p.k, l))),
        }
    }
    out.into_iter()
        .map(|pol| pol.with_thresholds(p.tau_lo, p.tau_hi))
        .collect()
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn ingest(corpus: &Path) -> Result<()> {
    let entries = load_corpus::<f64>(corpus)?;
    let mut modalities: BTreeMap<String, usize> = BTreeMap::new();
    for e in &entries {
        *modalities.entry(e.modality.to_string()).or_default() += 1;
    }
    let store = VectorStore::ingest(entries)?;
    print_json(&serde_json::json!({
        "entries": store.len(),
        "dim": store.dim(),
        "modalities": modalities,
    }))
}

fn retrieve(args: RetrieveArgs) -> Result<()> {
    let store = VectorStore::ingest(load_corpus(&args.corpus)?)?;
    let queries: Vec<QueryRecord> = match &args.queries {
        Some(p) => load_queries(p)?,
        None => Vec::new(),
    };
    let scorer = args.scorer.build(|| {
        if queries.is_empty() {
            return Err(Error::InvalidArgument(
                "synthetic scorers need --queries with relevant_ids".into(),
            ));
        }
        Ok(relevance_from_queries(&queries))
    })?;

    let method = match args.method {
        MethodArg::Topk => Method::TopKClip,
        MethodArg::Direct => Method::DirectRs,
        MethodArg::Rerank => Method::Rerank,
    };
    let policy = SelectionPolicy {
        method,
        k: args.policy.k,
        l: if method == Method::Rerank { args.l } else { args.policy.k },
        tau_lo: args.policy.tau_lo,
        tau_hi: args.policy.tau_hi,
    };
    policy.validate()?;

    let embedding = if method == Method::DirectRs {
        None
    } else if let Some(json) = &args.query_embedding {
        let values: Vec<f64> = serde_json::from_str(json)
            .map_err(|e| Error::InvalidArgument(format!("--query-embedding: {e}")))?;
        Some(Embedding::new(values)?)
    } else if let Some(q) = queries.iter().find(|q| q.text == args.query) {
        q.embedding.clone()
    } else if let ScorerSpec::Remote(url) = &args.scorer {
        let item = EmbedItem {
            entry_id: "query".into(),
            modality: Modality::Text,
            payload_ref: args.query.clone(),
        };
        let mut embs = RemoteScorer::new(url)?.embed(&[item])?;
        Some(Embedding::new(embs.remove(0))?)
    } else {
        None
    };

    let (selected, timing) =
        rerank::retrieve(&store, scorer.as_ref(), &args.query, embedding.as_ref(), &policy)?;
    print_json(&serde_json::json!({
        "query": args.query,
        "policy": policy,
        "selected": selected,
        "timing": timing,
    }))
}

fn eval_scorer(args: EvalScorerArgs) -> Result<()> {
    let set = load_triplets(&args.triplets)?;
    let config = SeparationConfig {
        seed: args.seed,
        bins: args.bins,
        range: None,
    };
    let mut merged: Option<ExperimentReport> = None;
    for spec in &args.scorer {
        let scorer = spec.build(|| Ok(relevance_from_triplets(&set.triplets)))?;
        let report = harness::run_separation_experiment(&set.triplets, scorer.as_ref(), &config)?;
        match &mut merged {
            Some(m) => m.methods.extend(report.methods),
            None => merged = Some(report),
        }
    }
    let mut report = merged.expect("at least one scorer");
    report.notes.extend(set.warnings);
    emit_report(&report, &args.out, args.format.into())
}

struct Loaded {
    store: VectorStore,
    queries: Vec<QueryRecord>,
    scorer: Box<dyn Scorer<f64>>,
    policies: Vec<SelectionPolicy>,
}

fn load_experiment(c: &ExperimentArgs) -> Result<Loaded> {
    let store = VectorStore::ingest(load_corpus(&c.corpus)?)?;
    let queries = load_queries(&c.queries)?;
    let scorer = c.scorer.build(|| Ok(relevance_from_queries(&queries)))?;
    let policies = policies(&c.methods, &c.l, &c.policy);
    Ok(Loaded {
        store,
        queries,
        scorer,
        policies,
    })
}

fn eval_retrieval(args: EvalRetrievalArgs) -> Result<()> {
    let c = &args.common;
    let loaded = load_experiment(c)?;
    let config = RetrievalConfig {
        seed: c.seed,
        depth: args.depth,
        measure_timing: args.timing,
        timing_repetitions: args.repetitions,
        rho: args.rho,
    };
    let report = harness::run_retrieval_experiment(
        &loaded.store,
        &loaded.queries,
        &loaded.policies,
        loaded.scorer.as_ref(),
        &config,
    )?;
    emit_report(&report, &c.out, c.format.into())
}

fn eval_e2e(args: EvalE2eArgs) -> Result<()> {
    let c = &args.common;
    let loaded = load_experiment(c)?;
    let responder: Box<dyn Responder> = match args.responder.split_once(':') {
        None if args.responder == "echo" => Box::new(EchoResponder),
        Some(("table", path)) => Box::new(TableResponder::read_file(Path::new(path))?),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown responder {:?}",
                args.responder
            )))
        }
    };
    let cs: Box<dyn CorrectnessScorer> = match args.cs.split_once(':') {
        None if args.cs == "grounded" => Box::new(GroundedCorrectness),
        Some(("table", path)) => Box::new(TableCorrectness::new(ScoreTable::read_file(Path::new(path))?)),
        _ => return Err(Error::InvalidArgument(format!("unknown cs scorer {:?}", args.cs))),
    };
    let report = harness::run_e2e_experiment(
        &loaded.store,
        &loaded.queries,
        &loaded.policies,
        loaded.scorer.as_ref(),
        responder.as_ref(),
        cs.as_ref(),
        &EndToEndConfig { seed: c.seed },
    )?;
    emit_report(&report, &c.out, c.format.into())
}

fn cost_model(rho: f64, corpus_size: usize, ls: &[usize]) -> Result<()> {
    let params = CostModelParams::new(rho, corpus_size)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "method,l,factor")?;
    writeln!(out, "top_k_clip,0,1.0000")?;
    for &l in ls {
        writeln!(out, "rerank_l{l},{l},{:.4}", rerank_cost_factor::<f64>(l, &params))?;
    }
    writeln!(out, "direct_rs,{corpus_size},{:.4}", direct_cost_factor::<f64>(&params))?;
    Ok(())
}

fn write_jsonl<T: serde::Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        seed: args.seed,
        corpus_size: args.corpus_size,
        queries: args.queries,
        ..SynthSpec::default()
    };
    let data = harness::synthetic_retrieval(&spec)?;
    fs::create_dir_all(&args.out_dir)?;
    write_jsonl(&args.out_dir.join("corpus.jsonl"), &data.corpus)?;
    write_jsonl(&args.out_dir.join("queries.jsonl"), &data.queries)?;
    write_jsonl(
        &args.out_dir.join("triplets.jsonl"),
        &harness::synthetic_triplets(args.triplets),
    )?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { corpus } => ingest(&corpus),
        Command::Retrieve(a) => retrieve(a),
        Command::EvalScorer(a) => eval_scorer(a),
        Command::EvalRetrieval(a) => eval_retrieval(a),
        Command::EvalE2e(a) => eval_e2e(a),
        Command::CostModel {
            rho,
            corpus_size,
            l,
        } => cost_model(rho, corpus_size, &l),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Scorer => 3,
            })
        }
    }
}
