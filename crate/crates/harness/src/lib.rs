//! Experiment runner for the Frank-Wolfe solver: data loading, synthetic instances, and CSV outputs.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod synth;

pub use config::{Design, ExperimentConfig, Overrides, ProblemConfig, RegionConfig, RunConfig};
pub use data::{load_dense_csv, load_movielens, zscore, DenseBundle, RatingsBundle, Subsample};
pub use error::{HarnessError, Result};
pub use experiment::{
    build_instance, run_certify, run_experiment, write_certificate, CertifyOutput, ExperimentOutput, Instance,
    Manifest, SummaryRow,
};
pub use synth::{identity_lp_optimum, synth_regression, SynthInstance};
