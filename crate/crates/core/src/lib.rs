//! Correction of sampling bias in prevalence estimates from
//! symptom-stratified testing data.
//!
//! People with more symptoms are more likely to be tested, so the share of
//! positives among the tested overstates prevalence. This crate rescales the
//! high-symptom categories by the sampling fraction, spreads the remaining
//! population mass evenly over the low-symptom categories and assigns them an
//! infected share, giving a corrected total prevalence together with its
//! asymptotic variance. A seeded simulator measures bias and MSE of the naive
//! and corrected estimators on populations with known prevalence.

pub mod correction;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod model;
pub mod reproduce;
pub mod sampling;
pub mod simulator;
pub mod variance;

pub use correction::{
    correct, CorrectionConfig, PrevalenceEstimate, SeverityPartition, UPolicy, URule,
};
pub use error::{Error, Result};
pub use model::{BiasedDensity, OrderingReport, PopulationSpec, TestedCounts};
pub use simulator::{run_monte_carlo, SampleMode, SimulationConfig, SimulationResult};
pub use variance::{covariance_matrix, total_prevalence_variance, VarianceEstimate};
