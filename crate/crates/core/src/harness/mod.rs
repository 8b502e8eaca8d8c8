//! Data, configuration and experiment orchestration.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod seed;

pub use config::{EvaluationConfig, ExperimentConfig};
pub use dataset::{
    encode_pgm, export_pgm_dir, generate_dataset, ingest_pgm_dir, parse_pgm, DatasetSpec, Generator,
};
pub use experiment::{
    comparison_csv, failed_hf_csv, render_report, run_experiment, run_experiment_with_denoiser, AttackSummary,
    ExperimentOutcome, ExperimentReport,
};
pub use seed::{derive_rng, derive_seed};
