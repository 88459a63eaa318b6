//! Experiment harness for the isolate-then-identify group-testing simulator:
//! JSON experiment configs, seeded parallel trials, CSV/JSON reports, sweeps,
//! and JSONL transcripts.

pub mod bench;
pub mod config;
pub mod harness;
pub mod transcript_io;

pub use config::ExperimentConfig;
pub use harness::{run_experiment, sweep, AggregateReport, Summary, SweepAxis, TrialRow};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] iati_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("transcript line {line}: {reason}")]
    Transcript { line: usize, reason: String },
}
