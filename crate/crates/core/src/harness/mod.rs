//! Monte Carlo verification of the limit theorems: configuration, test
//! statistics, the experiment runner and its report.

pub mod config;
pub mod degeneracy;
pub mod experiment;
pub mod ks;
pub mod report;

pub use config::{ExperimentConfig, Regime};
pub use degeneracy::{degeneracy_diagnostic, Degeneracy};
pub use experiment::{run_fclt_experiment, ExperimentReport, RunOptions};
pub use ks::{ks_one_sample_normal, ks_two_sample, KsResult};
