//! Dataset loading, experiment pipelines and report emission.

pub mod data;
pub mod experiments;
pub mod report;
pub mod responder;
pub mod synth;

pub use data::{
    load_corpus, load_queries, load_triplets, read_corpus, read_queries, read_triplets,
    relevance_from_queries, relevance_from_triplets, EvalTriplet, QueryRecord, TripletSet,
};
pub use experiments::{
    run_e2e_experiment, run_retrieval_experiment, run_separation_experiment, EndToEndConfig,
    RetrievalConfig, SeparationConfig,
};
pub use report::{emit_report, ExperimentKind, ExperimentReport, MethodReport, ReportFormat};
pub use responder::{
    ContextItem, CorrectnessScorer, EchoResponder, GroundedCorrectness, Responder,
    TableCorrectness, TableResponder,
};
pub use synth::{synthetic_retrieval, synthetic_triplets, SynthDataset, SynthSpec};
