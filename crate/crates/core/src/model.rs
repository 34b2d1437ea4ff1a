//! Population model: ground-truth populations, observed biased samples,
//! biased densities and the naive estimators.
//!
//! Categories are ordinal symptom levels addressed `1..=M`. Each category `s`
//! is split into two cells, `(s, 0)` uninfected and `(s, 1)` infected; cell
//! vectors are laid out as `[(1,0), (1,1), (2,0), (2,1), ...]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ cell_prop = 1` accepted when building a [`PopulationSpec`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

const ORDER_EPS: f64 = 1e-12;

#[inline]
pub(crate) fn cell_index(s: usize, infected: bool) -> usize {
    2 * (s - 1) + usize::from(infected)
}

fn check_category(s: usize, m: usize) -> Result<()> {
    if s == 0 || s > m {
        Err(Error::Index { index: s, m })
    } else {
        Ok(())
    }
}

/// Ground-truth population: cell proportions `p_s^(i)` and the probability
/// `p(s^(i))` that an individual of each cell is tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    m: usize,
    n: u64,
    cell_prop: Vec<f64>,
    test_prob: Vec<f64>,
}

impl PopulationSpec {
    /// Builds a spec from `2M` cell proportions and `2M` testing probabilities.
    pub fn new(n: u64, cell_prop: Vec<f64>, test_prob: Vec<f64>) -> Result<Self> {
        if !cell_prop.len().is_multiple_of(2) || cell_prop.len() < 4 {
            return Err(Error::Validation(format!(
                "cell proportions must have even length 2M with M >= 2, got {}",
                cell_prop.len()
            )));
        }
        if test_prob.len() != cell_prop.len() {
            return Err(Error::Dimension {
                expected: cell_prop.len(),
                got: test_prob.len(),
            });
        }
        if n == 0 {
            return Err(Error::Validation("census size N must be positive".into()));
        }
        for (k, &p) in cell_prop.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!(
                    "cell proportion #{} = {p} outside [0, 1]",
                    k + 1
                )));
            }
        }
        for (k, &p) in test_prob.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!(
                    "testing probability #{} = {p} outside [0, 1]",
                    k + 1
                )));
            }
        }
        let total: f64 = cell_prop.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Validation(format!(
                "cell proportions sum to {total}, deficit {:e} from 1",
                1.0 - total
            )));
        }
        Ok(Self {
            m: cell_prop.len() / 2,
            n,
            cell_prop,
            test_prob,
        })
    }

    /// Builds a spec whose proportions are exact ratios of per-cell head
    /// counts; the census size is their sum.
    pub fn from_cell_counts(counts: &[u64], test_prob: Vec<f64>) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::Validation("cell counts are all zero".into()));
        }
        let props = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self::new(n, props, test_prob)
    }

    /// Same proportions and testing probabilities, different census size.
    pub fn with_census(mut self, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("census size N must be positive".into()));
        }
        self.n = n;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn census(&self) -> u64 {
        self.n
    }

    pub fn cell_props(&self) -> &[f64] {
        &self.cell_prop
    }

    pub fn test_probs(&self) -> &[f64] {
        &self.test_prob
    }

    pub fn cell_prop(&self, s: usize, infected: bool) -> Result<f64> {
        check_category(s, self.m)?;
        Ok(self.cell_prop[cell_index(s, infected)])
    }

    pub fn cell_test_prob(&self, s: usize, infected: bool) -> Result<f64> {
        check_category(s, self.m)?;
        Ok(self.test_prob[cell_index(s, infected)])
    }

    /// `p_s = p_s^(0) + p_s^(1)`.
    pub fn symptom_marginal(&self, s: usize) -> Result<f64> {
        check_category(s, self.m)?;
        Ok(self.cell_prop[cell_index(s, false)] + self.cell_prop[cell_index(s, true)])
    }

    /// Category-level testing probability `p(s)`.
    ///
    /// When both cells share a testing probability that value is returned;
    /// otherwise the proportion-weighted mean of the two, which keeps
    /// `P[T = 1] = Σ p(s) p_s` exact. Zero for empty categories.
    pub fn test_marginal(&self, s: usize) -> Result<f64> {
        check_category(s, self.m)?;
        let (q0, q1) = (
            self.test_prob[cell_index(s, false)],
            self.test_prob[cell_index(s, true)],
        );
        if q0 == q1 {
            return Ok(q0);
        }
        let (p0, p1) = (
            self.cell_prop[cell_index(s, false)],
            self.cell_prop[cell_index(s, true)],
        );
        let ps = p0 + p1;
        if ps == 0.0 {
            Ok(0.0)
        } else {
            Ok((q0 * p0 + q1 * p1) / ps)
        }
    }

    /// Overall probability of being tested, `Σ_s p(s) p_s`.
    pub fn testing_rate(&self) -> f64 {
        (1..=self.m)
            .map(|s| self.test_marginal(s).unwrap() * self.symptom_marginal(s).unwrap())
            .sum()
    }

    /// Density of cells and categories among tested individuals (Bayes'
    /// rule applied to the selection mechanism).
    pub fn theoretical_biased_density(&self) -> Result<BiasedDensity> {
        let rate = self.testing_rate();
        if rate <= 0.0 {
            return Err(Error::NoOneTested);
        }
        let cells = self
            .cell_prop
            .iter()
            .zip(&self.test_prob)
            .map(|(p, q)| q * p / rate)
            .collect();
        let categories = (1..=self.m)
            .map(|s| self.test_marginal(s).unwrap() * self.symptom_marginal(s).unwrap() / rate)
            .collect();
        Ok(BiasedDensity { cells, categories })
    }

    /// Checks the four monotonicity chains expected of a population ordered
    /// by increasing symptom severity. Violations are reported, never fatal.
    pub fn validate_orderings(&self) -> OrderingReport {
        let m = self.m;
        let mut violations = Vec::new();

        let p_test: Vec<f64> = (1..=m).map(|s| self.test_marginal(s).unwrap()).collect();
        let p_test_inf: Vec<f64> = (1..=m)
            .map(|s| self.test_prob[cell_index(s, true)])
            .collect();
        let p_sym: Vec<f64> = (1..=m).map(|s| self.symptom_marginal(s).unwrap()).collect();
        let share: Vec<Option<f64>> = (1..=m)
            .map(|s| {
                let ps = p_sym[s - 1];
                (ps > 0.0).then(|| self.cell_prop[cell_index(s, true)] / ps)
            })
            .collect();

        let mut chain = |ordering: OrderingKind, values: Vec<(usize, f64)>| {
            for w in values.windows(2) {
                let ((s1, v1), (s2, v2)) = (w[0], w[1]);
                let broken = if ordering.increasing() {
                    v2 < v1 - ORDER_EPS
                } else {
                    v2 > v1 + ORDER_EPS
                };
                if broken {
                    violations.push(OrderingViolation {
                        ordering,
                        categories: (s1, s2),
                        values: (v1, v2),
                    });
                }
            }
        };
        let indexed = |v: &[f64]| v.iter().copied().enumerate().map(|(k, x)| (k + 1, x)).collect();

        chain(OrderingKind::TestingRate, indexed(&p_test));
        chain(OrderingKind::InfectedTestingRate, indexed(&p_test_inf));
        chain(
            OrderingKind::InfectedShare,
            share
                .iter()
                .enumerate()
                .filter_map(|(k, r)| r.map(|r| (k + 1, r)))
                .collect(),
        );
        chain(OrderingKind::SymptomShare, indexed(&p_sym));

        OrderingReport { violations }
    }
}

/// Density over cells (`2M`) and categories (`M`) among tested individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasedDensity {
    pub cells: Vec<f64>,
    pub categories: Vec<f64>,
}

impl BiasedDensity {
    /// Category density `f(s)`, 1-based.
    pub fn category(&self, s: usize) -> f64 {
        self.categories[s - 1]
    }

    /// Infected-cell density `f(s^(1))`, 1-based.
    pub fn infected(&self, s: usize) -> f64 {
        self.cells[cell_index(s, true)]
    }
}

/// Observed biased sample: tested-positive and tested-negative counts per
/// category, together with the census size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestedCounts {
    n: u64,
    n_pos: Vec<u64>,
    n_neg: Vec<u64>,
}

impl TestedCounts {
    /// `N_T = 0` is accepted here; estimators reject it with
    /// [`Error::EmptySample`].
    pub fn new(n: u64, n_pos: Vec<u64>, n_neg: Vec<u64>) -> Result<Self> {
        if n_pos.len() != n_neg.len() {
            return Err(Error::Dimension {
                expected: n_pos.len(),
                got: n_neg.len(),
            });
        }
        if n_pos.len() < 2 {
            return Err(Error::Validation(format!(
                "at least two symptom categories required, got {}",
                n_pos.len()
            )));
        }
        let total: u64 = n_pos.iter().chain(&n_neg).sum();
        if total > n {
            return Err(Error::Validation(format!(
                "tested total N_T = {total} exceeds census N = {n}"
            )));
        }
        Ok(Self { n, n_pos, n_neg })
    }

    pub fn m(&self) -> usize {
        self.n_pos.len()
    }

    pub fn census(&self) -> u64 {
        self.n
    }

    /// `N_T`.
    pub fn tested_total(&self) -> u64 {
        self.n_pos.iter().chain(&self.n_neg).sum()
    }

    pub fn positives(&self, s: usize) -> u64 {
        self.n_pos[s - 1]
    }

    pub fn negatives(&self, s: usize) -> u64 {
        self.n_neg[s - 1]
    }

    pub fn tested(&self, s: usize) -> u64 {
        self.n_pos[s - 1] + self.n_neg[s - 1]
    }

    pub fn positives_all(&self) -> &[u64] {
        &self.n_pos
    }

    pub fn negatives_all(&self) -> &[u64] {
        &self.n_neg
    }

    /// `N_T / N`.
    pub fn sampling_fraction(&self) -> f64 {
        self.tested_total() as f64 / self.n as f64
    }

    fn nonempty_total(&self) -> Result<f64> {
        match self.tested_total() {
            0 => Err(Error::EmptySample),
            t => Ok(t as f64),
        }
    }

    /// Empirical density of cells and categories among the tested.
    pub fn empirical_density(&self) -> Result<BiasedDensity> {
        let nt = self.nonempty_total()?;
        let cells = self
            .n_neg
            .iter()
            .zip(&self.n_pos)
            .flat_map(|(&neg, &pos)| [neg as f64 / nt, pos as f64 / nt])
            .collect();
        let categories = (1..=self.m()).map(|s| self.tested(s) as f64 / nt).collect();
        Ok(BiasedDensity { cells, categories })
    }

    /// Share of positives among everyone tested, uncorrected for selection.
    pub fn naive_prevalence(&self) -> Result<f64> {
        let nt = self.nonempty_total()?;
        Ok(self.n_pos.iter().sum::<u64>() as f64 / nt)
    }
}

/// The four monotonicity chains of a severity-ordered population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingKind {
    /// `p(1) <= ... <= p(M)`
    TestingRate,
    /// `p(1^(1)) <= ... <= p(M^(1))`
    InfectedTestingRate,
    /// `p_1^(1)/p_1 <= ... <= p_M^(1)/p_M`
    InfectedShare,
    /// `p_1 >= ... >= p_M`
    SymptomShare,
}

impl OrderingKind {
    /// Conventional label (2)..(5) of each chain.
    pub fn id(self) -> u8 {
        match self {
            OrderingKind::TestingRate => 2,
            OrderingKind::InfectedTestingRate => 3,
            OrderingKind::InfectedShare => 4,
            OrderingKind::SymptomShare => 5,
        }
    }

    fn increasing(self) -> bool {
        !matches!(self, OrderingKind::SymptomShare)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingViolation {
    pub ordering: OrderingKind,
    pub categories: (usize, usize),
    pub values: (f64, f64),
}

impl fmt::Display for OrderingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = if self.ordering.increasing() {
            "non-decreasing"
        } else {
            "non-increasing"
        };
        write!(
            f,
            "ordering ({}) {:?} expected {dir}: category {} = {}, category {} = {}",
            self.ordering.id(),
            self.ordering,
            self.categories.0,
            self.values.0,
            self.categories.1,
            self.values.1
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub violations: Vec<OrderingViolation>,
}

impl OrderingReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: OrderingKind) -> bool {
        self.violations.iter().any(|v| v.ordering == kind)
    }
}
