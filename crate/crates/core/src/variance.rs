//! Asymptotic variance of the corrected estimator.
//!
//! The corrected category vector depends on the sample only through the
//! high-group density `f_M`: the high entry is `(N_T/N) f_M` and each of the
//! `M̃` low/middle entries is `(1 − (N_T/N) f_M) / M̃`. Its covariance is the
//! rank-one matrix with `c = (N_T/N)²` in the high corner, `b = c/M̃` on the
//! high row and column and `a = c/M̃²` elsewhere, all scaled by `σ²_M`.
//! For the default partition `M̃ = M − 1`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correction::SeverityPartition;
use crate::error::{Error, Result};
use crate::model::{PopulationSpec, TestedCounts};
use crate::sampling::{multinomial, replicate_rng};

/// Binomial variance of the high-group density: `f(1 − f) / N_T`.
pub fn sigma2_of_fm(counts: &TestedCounts, partition: &SeverityPartition) -> Result<f64> {
    let f = counts.empirical_density()?;
    let fm: f64 = partition.high().iter().map(|&s| f.category(s)).sum();
    let fm = fm.clamp(0.0, 1.0);
    Ok(fm * (1.0 - fm) / counts.tested_total() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma2_m: f64,
    /// Matrix dimension: low/middle categories plus the pooled high group.
    pub m: usize,
    pub low_categories: Vec<usize>,
    pub high_categories: Vec<usize>,
    pub total_variance: Option<f64>,
}

impl VarianceEstimate {
    /// The `m × m` covariance matrix, high group last.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let last = self.m - 1;
        (0..self.m)
            .map(|i| {
                (0..self.m)
                    .map(|j| {
                        let k = match (i == last, j == last) {
                            (false, false) => self.a,
                            (true, true) => self.c,
                            _ => self.b,
                        };
                        k * self.sigma2_m
                    })
                    .collect()
            })
            .collect()
    }

    pub fn with_total_variance(mut self, u_used: &BTreeMap<usize, f64>) -> Result<Self> {
        self.total_variance = Some(total_prevalence_variance(&self, u_used)?);
        Ok(self)
    }
}

pub fn covariance_matrix(
    counts: &TestedCounts,
    partition: &SeverityPartition,
) -> Result<VarianceEstimate> {
    if partition.m() != counts.m() {
        return Err(Error::Dimension {
            expected: counts.m(),
            got: partition.m(),
        });
    }
    let low: Vec<usize> = partition.rest().into_iter().collect();
    if low.is_empty() {
        return Err(Error::Degenerate(
            "no low or middle categories: the covariance matrix has a single entry".into(),
        ));
    }
    let sigma2_m = sigma2_of_fm(counts, partition)?;
    let fraction = counts.sampling_fraction();
    let c = fraction * fraction;
    let rest = low.len() as f64;
    Ok(VarianceEstimate {
        a: c * (1.0 / rest) * (1.0 / rest),
        b: c / rest,
        c,
        sigma2_m,
        m: low.len() + 1,
        low_categories: low,
        high_categories: partition.high().iter().copied().collect(),
        total_variance: None,
    })
}

/// Variance of `Σ_low u_s p̃_s + p̃_high`, i.e. `w Σ wᵀ` with
/// `w = (u_1, …, u_M̃, 1)`.
///
/// `u_used` must hold every category; high categories must carry `u = 1`.
pub fn total_prevalence_variance(
    ve: &VarianceEstimate,
    u_used: &BTreeMap<usize, f64>,
) -> Result<f64> {
    let expected = ve.low_categories.len() + ve.high_categories.len();
    if u_used.len() != expected {
        return Err(Error::Dimension {
            expected,
            got: u_used.len(),
        });
    }
    for &s in &ve.high_categories {
        match u_used.get(&s) {
            Some(&u) if (u - 1.0).abs() <= 1e-12 => {}
            Some(&u) => {
                return Err(Error::Config(format!(
                    "high category {s} must carry u = 1, got {u}"
                )))
            }
            None => return Err(Error::Index { index: s, m: expected }),
        }
    }
    let mut w = Vec::with_capacity(ve.m);
    for &s in &ve.low_categories {
        let u = *u_used.get(&s).ok_or(Error::Index { index: s, m: expected })?;
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Config(format!("u for category {s} = {u} outside [0, 1]")));
        }
        w.push(u);
    }
    w.push(1.0);
    let sigma = ve.matrix();
    let quad: f64 = (0..ve.m)
        .map(|i| (0..ve.m).map(|j| w[i] * sigma[i][j] * w[j]).sum::<f64>())
        .sum();
    Ok(quad.max(0.0))
}

/// Empirical check of the multinomial central limit: covariance of the
/// proportion vector over `replicates` draws of `Multinomial(n, p*)`
/// against `(Diag(p*) − p* p*ᵀ) / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: u64,
    pub replicates: usize,
    pub expected: Vec<Vec<f64>>,
    pub empirical: Vec<Vec<f64>>,
    /// Normal-theory standard error of each empirical covariance entry:
    /// `sqrt((S_ii S_jj + S_ij²) / R)`.
    pub standard_errors: Vec<Vec<f64>>,
    pub max_abs_deviation: f64,
    /// Largest `|empirical − expected| / standard error` over all entries.
    pub max_standardized_deviation: f64,
    pub worst_entry: (usize, usize),
}

impl CltReport {
    pub fn within(&self, standard_errors: f64) -> bool {
        self.max_standardized_deviation < standard_errors
    }
}

pub fn multinomial_clt_check(
    spec: &PopulationSpec,
    n: u64,
    replicates: usize,
    seed: u64,
) -> Result<CltReport> {
    if n < 100 || replicates < 100 {
        return Err(Error::Config(format!(
            "need n >= 100 and at least 100 replicates, got n = {n}, R = {replicates}"
        )));
    }
    let p = spec.cell_props();
    let k = p.len();
    let nf = n as f64;

    let draws: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            multinomial(&mut rng, n, p)
                .into_iter()
                .map(|x| x as f64 / nf)
                .collect()
        })
        .collect();

    let rf = replicates as f64;
    let mut mean = vec![0.0; k];
    for d in &draws {
        for (m, x) in mean.iter_mut().zip(d) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rf);

    let mut empirical = vec![vec![0.0; k]; k];
    for d in &draws {
        for i in 0..k {
            let di = d[i] - mean[i];
            for j in 0..k {
                empirical[i][j] += di * (d[j] - mean[j]);
            }
        }
    }
    empirical
        .iter_mut()
        .flatten()
        .for_each(|v| *v /= rf - 1.0);

    let expected: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let diag = if i == j { p[i] } else { 0.0 };
                    (diag - p[i] * p[j]) / nf
                })
                .collect()
        })
        .collect();
    let standard_errors: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    ((expected[i][i] * expected[j][j] + expected[i][j].powi(2)) / rf).sqrt()
                })
                .collect()
        })
        .collect();

    let mut max_abs_deviation: f64 = 0.0;
    let mut max_standardized_deviation: f64 = 0.0;
    let mut worst_entry = (0, 0);
    for i in 0..k {
        for j in 0..k {
            let dev = (empirical[i][j] - expected[i][j]).abs();
            max_abs_deviation = max_abs_deviation.max(dev);
            let z = match standard_errors[i][j] {
                se if se > 0.0 => dev / se,
                _ if dev == 0.0 => 0.0,
                _ => f64::INFINITY,
            };
            if z > max_standardized_deviation {
                max_standardized_deviation = z;
                worst_entry = (i, j);
            }
        }
    }

    Ok(CltReport {
        n,
        replicates,
        expected,
        empirical,
        standard_errors,
        max_abs_deviation,
        max_standardized_deviation,
        worst_entry,
    })
}
