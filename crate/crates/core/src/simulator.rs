//! Monte Carlo study of the naive and corrected estimators on populations
//! whose true prevalence is known.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correction::{correct, CorrectionConfig};
use crate::error::{Error, Result};
use crate::model::{PopulationSpec, TestedCounts};
use crate::sampling::{binomial, multinomial, replicate_rng};

/// `Σ_s p_s^(1)`.
pub fn true_prevalence(spec: &PopulationSpec) -> f64 {
    spec.cell_props().iter().skip(1).step_by(2).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Every individual gets a cell, then is tested with its cell's probability.
    PerIndividual,
    /// Multinomial cell totals, then one binomial tested count per cell.
    #[default]
    MultinomialExact,
}

/// Draws one tested sample of the whole census. May return `N_T = 0`.
pub fn draw_sample_with<R: Rng + ?Sized>(
    spec: &PopulationSpec,
    mode: SampleMode,
    rng: &mut R,
) -> TestedCounts {
    let m = spec.m();
    let probs = spec.cell_props();
    let tests = spec.test_probs();
    let mut tested = vec![0u64; 2 * m];
    match mode {
        SampleMode::MultinomialExact => {
            let cells = multinomial(rng, spec.census(), probs);
            for (k, &count) in cells.iter().enumerate() {
                tested[k] = binomial(rng, count, tests[k]);
            }
        }
        SampleMode::PerIndividual => {
            let picker = WeightedIndex::new(probs).expect("cell proportions sum to one");
            for _ in 0..spec.census() {
                let k = picker.sample(rng);
                if rng.random_bool(tests[k]) {
                    tested[k] += 1;
                }
            }
        }
    }
    let n_neg = tested.iter().step_by(2).copied().collect();
    let n_pos = tested.iter().skip(1).step_by(2).copied().collect();
    TestedCounts::new(spec.census(), n_pos, n_neg).expect("tested counts never exceed census")
}

/// [`draw_sample_with`] on a generator seeded by `seed`.
pub fn draw_sample(spec: &PopulationSpec, mode: SampleMode, seed: u64) -> TestedCounts {
    draw_sample_with(spec, mode, &mut replicate_rng(seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub spec: PopulationSpec,
    pub correction: CorrectionConfig,
    pub replicates: usize,
    pub seed: u64,
    pub sample_mode: SampleMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub n_t: u64,
    /// `None` when nobody was tested.
    pub naive: Option<f64>,
    pub corrected: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    pub std_dev: f64,
    /// Monte Carlo standard error of the mean.
    pub std_error: f64,
}

impl EstimatorSummary {
    fn from_values(values: &[f64], truth: f64) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            bias: mean - truth,
            mse,
            std_dev: var.sqrt(),
            std_error: (var / n).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub completed: usize,
    /// Replicates with `N_T = 0`, excluded from the estimator summaries.
    pub skipped: usize,
    /// Mean tested count over all replicates, skipped ones included.
    pub mean_n_t: f64,
    pub naive: Option<EstimatorSummary>,
    pub corrected: Option<EstimatorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub true_prevalence: f64,
    pub testing_rate: f64,
    pub per_replicate: Vec<ReplicateOutcome>,
    pub summary: SimulationSummary,
}

/// Runs `R` independent replicates. Replicate `i` draws from its own stream
/// of `seed`, so the result does not depend on scheduling.
pub fn run_monte_carlo(config: &SimulationConfig) -> Result<SimulationResult> {
    if config.replicates == 0 {
        return Err(Error::Config("at least one replicate required".into()));
    }
    if config.correction.partition.m() != config.spec.m() {
        return Err(Error::Partition(format!(
            "partition covers {} categories, population has {}",
            config.correction.partition.m(),
            config.spec.m()
        )));
    }
    config.correction.u_policy.validate()?;

    let per_replicate: Vec<ReplicateOutcome> = (0..config.replicates)
        .into_par_iter()
        .map(|i| run_replicate(config, i))
        .collect::<Result<_>>()?;

    let truth = true_prevalence(&config.spec);
    let naive: Vec<f64> = per_replicate.iter().filter_map(|r| r.naive).collect();
    let corrected: Vec<f64> = per_replicate.iter().filter_map(|r| r.corrected).collect();
    let mean_n_t =
        per_replicate.iter().map(|r| r.n_t as f64).sum::<f64>() / per_replicate.len() as f64;
    let summary = SimulationSummary {
        completed: naive.len(),
        skipped: per_replicate.len() - naive.len(),
        mean_n_t,
        naive: EstimatorSummary::from_values(&naive, truth),
        corrected: EstimatorSummary::from_values(&corrected, truth),
    };
    Ok(SimulationResult {
        true_prevalence: truth,
        testing_rate: config.spec.testing_rate(),
        per_replicate,
        summary,
    })
}

fn run_replicate(config: &SimulationConfig, index: usize) -> Result<ReplicateOutcome> {
    let mut rng = replicate_rng(config.seed, index as u64);
    let sample = draw_sample_with(&config.spec, config.sample_mode, &mut rng);
    let n_t = sample.tested_total();
    if n_t == 0 {
        return Ok(ReplicateOutcome {
            replicate: index,
            n_t,
            naive: None,
            corrected: None,
        });
    }
    let correction = CorrectionConfig {
        seed: rng.random(),
        ..config.correction.clone()
    };
    let estimate = correct(&sample, &correction)?;
    Ok(ReplicateOutcome {
        replicate: index,
        n_t,
        naive: Some(sample.naive_prevalence()?),
        corrected: Some(estimate.total_prevalence),
    })
}
