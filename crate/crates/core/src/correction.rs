//! Selection-bias correction of prevalence estimates.
//!
//! High-symptom categories are scaled directly by the sampling fraction
//! (`p̃_s = (N_T/N) f_s`, nearly everyone there is tested and infected). The
//! remaining mass `1 − p₊` is spread evenly over the low and middle
//! categories (maximum entropy given no information about their sizes), and
//! each of those receives an infected share `u` chosen by a [`UPolicy`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TestedCounts;

/// Overall testing rate over the testing probability of one category.
pub fn correction_factor(testing_rate: f64, p_of_x: f64) -> Result<f64> {
    if p_of_x <= 0.0 {
        return Err(Error::CategoryNeverTested);
    }
    Ok(testing_rate / p_of_x)
}

/// Lower bound on `p(s)` implied by the sample: `(N_T/N) f(s) <= p(s)`.
pub fn implied_p_lower_bound(counts: &TestedCounts, s: usize) -> Result<f64> {
    if s == 0 || s > counts.m() {
        return Err(Error::Index {
            index: s,
            m: counts.m(),
        });
    }
    let f = counts.empirical_density()?;
    Ok(counts.sampling_fraction() * f.category(s))
}

/// Split of the categories `1..=M` into low, middle and high symptom groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityPartition {
    m: usize,
    low: BTreeSet<usize>,
    middle: BTreeSet<usize>,
    high: BTreeSet<usize>,
}

impl SeverityPartition {
    pub fn new(
        m: usize,
        low: impl IntoIterator<Item = usize>,
        middle: impl IntoIterator<Item = usize>,
        high: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let low: BTreeSet<usize> = low.into_iter().collect();
        let middle: BTreeSet<usize> = middle.into_iter().collect();
        let high: BTreeSet<usize> = high.into_iter().collect();
        if high.is_empty() {
            return Err(Error::Partition("high group is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for &s in low.iter().chain(&middle).chain(&high) {
            if s == 0 || s > m {
                return Err(Error::Partition(format!(
                    "category {s} outside 1..={m}"
                )));
            }
            if !seen.insert(s) {
                return Err(Error::Partition(format!(
                    "category {s} assigned to more than one group"
                )));
            }
        }
        if seen.len() != m {
            let missing: Vec<String> = (1..=m)
                .filter(|s| !seen.contains(s))
                .map(|s| s.to_string())
                .collect();
            return Err(Error::Partition(format!(
                "categories not assigned to any group: {}",
                missing.join(",")
            )));
        }
        Ok(Self {
            m,
            low,
            middle,
            high,
        })
    }

    /// `high = {M}`, `low = {1..M-1}`, no middle group.
    pub fn top_only(m: usize) -> Result<Self> {
        Self::new(m, 1..m, [], [m])
    }

    /// Parses `high=4;low=1,2,3[;middle=...]`. Omitted `low` means every
    /// category not listed elsewhere.
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, list) = part
                .split_once('=')
                .ok_or_else(|| Error::Partition(format!("expected group=list, got {part:?}")))?;
            let key = key.trim();
            if !matches!(key, "low" | "middle" | "high") {
                return Err(Error::Partition(format!("unknown group {key:?}")));
            }
            let values = list
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(|v| {
                    v.parse::<usize>()
                        .map_err(|_| Error::Partition(format!("bad category {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if groups.insert(key, values).is_some() {
                return Err(Error::Partition(format!("group {key:?} given twice")));
            }
        }
        let high = groups.remove("high").unwrap_or_default();
        let middle = groups.remove("middle").unwrap_or_default();
        let low = match groups.remove("low") {
            Some(low) => low,
            None => (1..=m)
                .filter(|s| !high.contains(s) && !middle.contains(s))
                .collect(),
        };
        Self::new(m, low, middle, high)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn low(&self) -> &BTreeSet<usize> {
        &self.low
    }

    pub fn middle(&self) -> &BTreeSet<usize> {
        &self.middle
    }

    pub fn high(&self) -> &BTreeSet<usize> {
        &self.high
    }

    /// Low and middle categories, ascending.
    pub fn rest(&self) -> BTreeSet<usize> {
        self.low.union(&self.middle).copied().collect()
    }

    pub fn group_of(&self, s: usize) -> Option<Group> {
        if self.high.contains(&s) {
            Some(Group::High)
        } else if self.middle.contains(&s) {
            Some(Group::Middle)
        } else if self.low.contains(&s) {
            Some(Group::Low)
        } else {
            None
        }
    }
}

impl fmt::Display for SeverityPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |set: &BTreeSet<usize>| {
            set.iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "high={};low={}", join(&self.high), join(&self.low))?;
        if !self.middle.is_empty() {
            write!(f, ";middle={}", join(&self.middle))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Low,
    Middle,
    High,
}

/// How the infected share `u` of a low or middle category is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum URule {
    /// Positive share among the tested of that category.
    PlugIn,
    /// A fixed central value, e.g. 0.5 for the mean of `U(0, 1)`.
    Mean { midpoint: f64 },
    /// Drawn from `U(lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    Fixed { value: f64 },
}

impl URule {
    fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        match *self {
            URule::PlugIn => Ok(()),
            URule::Mean { midpoint } => unit("mean", midpoint),
            URule::Fixed { value } => unit("fixed", value),
            URule::Uniform { lo, hi } => {
                unit("uniform lower bound", lo)?;
                unit("uniform upper bound", hi)?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(Error::Config(format!("uniform range needs lo < hi, got {lo}, {hi}")))
                }
            }
        }
    }
}

impl fmt::Display for URule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            URule::PlugIn => write!(f, "plugin"),
            URule::Mean { midpoint } => write!(f, "mean:{midpoint}"),
            URule::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            URule::Fixed { value } => write!(f, "fixed:{value}"),
        }
    }
}

impl FromStr for URule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {v:?} in u policy {s:?}")))
        };
        let rule = match (name, arg) {
            ("plugin", None) => URule::PlugIn,
            ("mean", None) => URule::Mean { midpoint: 0.5 },
            ("mean", Some(a)) => URule::Mean { midpoint: num(a)? },
            ("fixed", Some(a)) => URule::Fixed { value: num(a)? },
            ("uniform", None) => URule::Uniform { lo: 0.0, hi: 1.0 },
            ("uniform", Some(a)) => {
                let (lo, hi) = a
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("uniform needs lo,hi in {s:?}")))?;
                URule::Uniform {
                    lo: num(lo)?,
                    hi: num(hi)?,
                }
            }
            _ => return Err(Error::Config(format!("unknown u policy {s:?}"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// Rule for `u` plus the rule the plug-in estimate falls back on when a
/// category has no tested individuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UPolicy {
    pub rule: URule,
    pub fallback: URule,
}

impl Default for UPolicy {
    fn default() -> Self {
        Self {
            rule: URule::PlugIn,
            fallback: URule::Mean { midpoint: 0.5 },
        }
    }
}

impl UPolicy {
    pub fn new(rule: URule, fallback: URule) -> Result<Self> {
        let policy = Self { rule, fallback };
        policy.validate()?;
        Ok(policy)
    }

    pub fn only(rule: URule) -> Result<Self> {
        Self::new(rule, UPolicy::default().fallback)
    }

    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        self.fallback.validate()?;
        if self.fallback == URule::PlugIn {
            return Err(Error::Config("plug-in fallback cannot itself be plugin".into()));
        }
        Ok(())
    }
}

impl fmt::Display for UPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule {
            URule::PlugIn => write!(f, "plugin:{}", self.fallback),
            rule => write!(f, "{rule}"),
        }
    }
}

/// Accepts `plugin`, `plugin:<fallback>`, `mean[:m]`, `uniform[:lo,hi]`,
/// `fixed:v`.
impl FromStr for UPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("plugin:") {
            return UPolicy::new(URule::PlugIn, rest.parse()?);
        }
        UPolicy::only(s.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub partition: SeverityPartition,
    pub u_policy: UPolicy,
    pub seed: u64,
    /// Replaces the empirical category density `f_s` of high categories.
    pub density_override: Option<BTreeMap<usize, f64>>,
}

impl CorrectionConfig {
    /// Top-only partition, plug-in `u` with mean fallback, seed 0.
    pub fn for_categories(m: usize) -> Result<Self> {
        Ok(Self {
            partition: SeverityPartition::top_only(m)?,
            u_policy: UPolicy::default(),
            seed: 0,
            density_override: None,
        })
    }
}

/// Which branch of the `u` policy produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum USource {
    SampleShare,
    Mean,
    Uniform,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UAssignment {
    pub p_tilde_inf: f64,
    pub u: f64,
    pub source: USource,
    /// True when the plug-in rule had no tested individuals to use.
    pub fallback: bool,
}

/// How each category's numbers were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTrace {
    pub category: usize,
    pub group: Group,
    /// `"high"` for direct scaling or `"maxent"` for even redistribution.
    pub proportion_rule: String,
    pub density_overridden: bool,
    pub u_source: Option<USource>,
    pub u_fallback: bool,
}

/// Corrected per-category proportions and total prevalence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    pub p_tilde: Vec<f64>,
    pub p_tilde_inf: Vec<f64>,
    pub total_prevalence: f64,
    /// Infected share per category; `1` for high categories.
    pub u_used: BTreeMap<usize, f64>,
    pub p_plus: f64,
    pub trace: Vec<CategoryTrace>,
}

/// `p̃_s = (N_T/N) f_s` and `p̃_s^(1) = p̃_s` for every high category.
pub fn correct_high(
    counts: &TestedCounts,
    partition: &SeverityPartition,
    density_override: Option<&BTreeMap<usize, f64>>,
) -> Result<BTreeMap<usize, (f64, f64)>> {
    let f = counts.empirical_density()?;
    if let Some(ov) = density_override {
        for (&s, &v) in ov {
            if !partition.high().contains(&s) {
                return Err(Error::Config(format!(
                    "density override for category {s}, which is not in the high group"
                )));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "density override {v} for category {s} outside [0, 1]"
                )));
            }
        }
    }
    let fraction = counts.sampling_fraction();
    Ok(partition
        .high()
        .iter()
        .map(|&s| {
            let fs = density_override
                .and_then(|ov| ov.get(&s).copied())
                .unwrap_or_else(|| f.category(s));
            let p = fraction * fs;
            (s, (p, p))
        })
        .collect())
}

/// Spreads `1 − p_plus` evenly over `categories`.
pub fn redistribute_low(p_plus: f64, categories: &BTreeSet<usize>) -> Result<BTreeMap<usize, f64>> {
    if !(0.0..=1.0).contains(&p_plus) {
        return Err(Error::Config(format!("p_plus = {p_plus} outside [0, 1]")));
    }
    if categories.is_empty() {
        if p_plus < 1.0 {
            return Err(Error::Partition(format!(
                "no low or middle categories to receive the remaining mass {}",
                1.0 - p_plus
            )));
        }
        return Ok(BTreeMap::new());
    }
    let share = (1.0 - p_plus) / categories.len() as f64;
    Ok(categories.iter().map(|&s| (s, share)).collect())
}

/// Chooses `u` for each category of `p_tilde` and sets `p̃_s^(1) = u p̃_s`.
pub fn assign_prevalence(
    counts: &TestedCounts,
    p_tilde: &BTreeMap<usize, f64>,
    policy: &UPolicy,
    seed: u64,
) -> Result<BTreeMap<usize, UAssignment>> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    for (&s, &p) in p_tilde {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("p̃_{s} = {p} outside [0, 1]")));
        }
        if s == 0 || s > counts.m() {
            return Err(Error::Index {
                index: s,
                m: counts.m(),
            });
        }
        let (rule, fallback) = match policy.rule {
            URule::PlugIn if counts.tested(s) > 0 => (URule::PlugIn, false),
            URule::PlugIn => (policy.fallback, true),
            rule => (rule, false),
        };
        let (u, source) = match rule {
            URule::PlugIn => (
                counts.positives(s) as f64 / counts.tested(s) as f64,
                USource::SampleShare,
            ),
            URule::Mean { midpoint } => (midpoint, USource::Mean),
            URule::Fixed { value } => (value, USource::Fixed),
            URule::Uniform { lo, hi } => (rng.random_range(lo..hi), USource::Uniform),
        };
        out.insert(
            s,
            UAssignment {
                p_tilde_inf: u * p,
                u,
                source,
                fallback,
            },
        );
    }
    Ok(out)
}

/// Pools low and middle categories into category 1 and high categories into
/// category 2.
pub fn collapse(counts: &TestedCounts, partition: &SeverityPartition) -> Result<TestedCounts> {
    if partition.m() != counts.m() {
        return Err(Error::Dimension {
            expected: counts.m(),
            got: partition.m(),
        });
    }
    let sum = |set: &BTreeSet<usize>, pos: bool| -> u64 {
        set.iter()
            .map(|&s| {
                if pos {
                    counts.positives(s)
                } else {
                    counts.negatives(s)
                }
            })
            .sum()
    };
    let rest = partition.rest();
    TestedCounts::new(
        counts.census(),
        vec![sum(&rest, true), sum(partition.high(), true)],
        vec![sum(&rest, false), sum(partition.high(), false)],
    )
}

/// Full correction: high groups scaled, remaining mass redistributed evenly,
/// infected shares assigned per the `u` policy.
pub fn correct(counts: &TestedCounts, config: &CorrectionConfig) -> Result<PrevalenceEstimate> {
    let partition = &config.partition;
    if partition.m() != counts.m() {
        return Err(Error::Partition(format!(
            "partition covers {} categories, counts have {}",
            partition.m(),
            counts.m()
        )));
    }
    config.u_policy.validate()?;
    let high = correct_high(counts, partition, config.density_override.as_ref())?;
    let p_plus: f64 = high.values().map(|(p, _)| p).sum();
    if p_plus > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "high-group mass {p_plus} exceeds 1; check the density override"
        )));
    }
    let p_plus = p_plus.min(1.0);
    let rest = partition.rest();
    let low = redistribute_low(p_plus, &rest)?;
    let assigned = assign_prevalence(counts, &low, &config.u_policy, config.seed)?;

    let m = counts.m();
    let mut p_tilde = vec![0.0; m];
    let mut p_tilde_inf = vec![0.0; m];
    let mut u_used = BTreeMap::new();
    let mut trace = Vec::with_capacity(m);
    for s in 1..=m {
        let group = partition.group_of(s).expect("partition covers 1..=M");
        if let Some(&(p, p_inf)) = high.get(&s) {
            p_tilde[s - 1] = p;
            p_tilde_inf[s - 1] = p_inf;
            u_used.insert(s, 1.0);
            trace.push(CategoryTrace {
                category: s,
                group,
                proportion_rule: "high".into(),
                density_overridden: config
                    .density_override
                    .as_ref()
                    .is_some_and(|ov| ov.contains_key(&s)),
                u_source: None,
                u_fallback: false,
            });
        } else {
            let a = assigned[&s];
            p_tilde[s - 1] = low[&s];
            p_tilde_inf[s - 1] = a.p_tilde_inf;
            u_used.insert(s, a.u);
            trace.push(CategoryTrace {
                category: s,
                group,
                proportion_rule: "maxent".into(),
                density_overridden: false,
                u_source: Some(a.source),
                u_fallback: a.fallback,
            });
        }
    }
    let total_prevalence = p_tilde_inf.iter().sum();
    Ok(PrevalenceEstimate {
        p_tilde,
        p_tilde_inf,
        total_prevalence,
        u_used,
        p_plus,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy_counts;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn counts(n: u64, pos: &[u64], neg: &[u64]) -> TestedCounts {
        TestedCounts::new(n, pos.to_vec(), neg.to_vec()).unwrap()
    }

    #[test]
    fn correction_factor_examples() {
        assert!(close(correction_factor(0.108, 0.9).unwrap(), 0.12, 1e-15));
        for q in [0.001, 0.3, 1.0] {
            assert_eq!(correction_factor(q, q).unwrap(), 1.0);
        }
        assert!(close(correction_factor(0.108, 0.001).unwrap(), 108.0, 1e-12));
        assert_eq!(correction_factor(0.1, 0.0), Err(Error::CategoryNeverTested));
    }

    #[test]
    fn lower_bound_examples() {
        assert!(close(implied_p_lower_bound(&toy_counts(), 4).unwrap(), 0.09, 1e-15));
        let c = counts(100, &[0, 5], &[0, 5]);
        assert_eq!(implied_p_lower_bound(&c, 1).unwrap(), 0.0);
        let dp1 = counts(3063, &[0, 306], &[0, 0]);
        assert!(close(implied_p_lower_bound(&dp1, 2).unwrap(), 306.0 / 3063.0, 1e-15));
        assert!(close(implied_p_lower_bound(&dp1, 2).unwrap(), 0.0999, 1e-4));
        assert!(implied_p_lower_bound(&dp1, 3).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(SeverityPartition::new(3, [1], [2], [3]).is_ok());
        assert!(SeverityPartition::new(3, [1, 2], [], []).is_err());
        assert!(SeverityPartition::new(3, [1, 2], [2], [3]).is_err());
        assert!(SeverityPartition::new(3, [1], [], [3]).is_err());
        assert!(SeverityPartition::new(3, [1, 2], [], [4]).is_err());
    }

    #[test]
    fn partition_parsing() {
        let p = SeverityPartition::parse("high=4;low=1,2,3", 4).unwrap();
        assert_eq!(p, SeverityPartition::top_only(4).unwrap());
        let p = SeverityPartition::parse("high=3,4;middle=2", 4).unwrap();
        assert_eq!(p.low().iter().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(p.to_string(), "high=3,4;low=1;middle=2");
        assert_eq!(SeverityPartition::parse(&p.to_string(), 4).unwrap(), p);
        assert!(SeverityPartition::parse("top=4", 4).is_err());
        assert!(SeverityPartition::parse("high=x", 4).is_err());
        assert!(SeverityPartition::parse("low=1,2,3", 4).is_err());
    }

    #[test]
    fn u_policy_parsing() {
        assert_eq!("plugin".parse::<UPolicy>().unwrap(), UPolicy::default());
        let p: UPolicy = "plugin:fixed:0.2".parse().unwrap();
        assert_eq!(p.fallback, URule::Fixed { value: 0.2 });
        let p: UPolicy = "uniform:0,0.5".parse().unwrap();
        assert_eq!(p.rule, URule::Uniform { lo: 0.0, hi: 0.5 });
        let p: UPolicy = "mean:0.5".parse().unwrap();
        assert_eq!(p.rule, URule::Mean { midpoint: 0.5 });
        assert!("fixed:1.5".parse::<UPolicy>().is_err());
        assert!("mean:-0.1".parse::<UPolicy>().is_err());
        assert!("uniform:0.6,0.4".parse::<UPolicy>().is_err());
        assert!("plugin:plugin".parse::<UPolicy>().is_err());
        assert!("guess".parse::<UPolicy>().is_err());
        for text in ["plugin:mean:0.5", "uniform:0,1", "fixed:0.25"] {
            let p: UPolicy = text.parse().unwrap();
            assert_eq!(p.to_string().parse::<UPolicy>().unwrap(), p);
        }
    }

    #[test]
    fn correct_high_examples() {
        let toy = toy_counts();
        let part = SeverityPartition::top_only(4).unwrap();
        let high = correct_high(&toy, &part, None).unwrap();
        let (p, p_inf) = high[&4];
        assert!(close(p, 0.0899, 2e-4));
        assert_eq!(p, p_inf);

        let l1 = counts(5824, &[0, 289], &[0, 0]);
        let high = correct_high(&l1, &SeverityPartition::top_only(2).unwrap(), None).unwrap();
        assert!(close(high[&2].0, 289.0 / 5824.0, 1e-15));
        assert!(close(high[&2].0, 0.05, 5e-3));

        let only_high = counts(1000, &[0, 0, 40], &[0, 0, 10]);
        let high =
            correct_high(&only_high, &SeverityPartition::top_only(3).unwrap(), None).unwrap();
        assert!(close(high[&3].0, 0.05, 1e-15));
    }

    #[test]
    fn override_must_target_high_group() {
        let c = counts(3063, &[48, 50], &[402, 0]);
        let part = SeverityPartition::top_only(2).unwrap();
        let bad = BTreeMap::from([(1, 0.5)]);
        assert!(correct_high(&c, &part, Some(&bad)).is_err());
        let bad = BTreeMap::from([(2, 1.5)]);
        assert!(correct_high(&c, &part, Some(&bad)).is_err());
        let ok = BTreeMap::from([(2, 0.9)]);
        let high = correct_high(&c, &part, Some(&ok)).unwrap();
        assert!(close(high[&2].0, 500.0 / 3063.0 * 0.9, 1e-15));
    }

    #[test]
    fn redistribute_examples() {
        let cats = BTreeSet::from([1, 2, 3]);
        let r = redistribute_low(0.09, &cats).unwrap();
        for s in 1..=3 {
            assert!(close(r[&s], 0.91 / 3.0, 1e-15));
            assert!(close(r[&s], 0.3033, 1e-4));
        }
        assert!(close(r.values().sum::<f64>(), 0.91, 1e-15));

        let r = redistribute_low(1.0, &cats).unwrap();
        assert!(r.values().all(|&v| v == 0.0));

        let r = redistribute_low(0.099, &BTreeSet::from([1])).unwrap();
        assert!(close(r[&1], 0.901, 1e-15));

        assert!(redistribute_low(0.5, &BTreeSet::new()).is_err());
        assert!(redistribute_low(1.0, &BTreeSet::new()).unwrap().is_empty());
    }

    #[test]
    fn assign_prevalence_examples() {
        let dp2 = counts(3063, &[11, 306], &[90, 0]);
        let p = BTreeMap::from([(1, 0.901)]);
        let a = assign_prevalence(&dp2, &p, &UPolicy::default(), 0).unwrap();
        assert!(close(a[&1].u, 11.0 / 101.0, 1e-15));
        assert!(close(a[&1].p_tilde_inf, 0.098, 5e-4));
        assert_eq!(a[&1].source, USource::SampleShare);

        let mean = UPolicy::only(URule::Mean { midpoint: 0.5 }).unwrap();
        let a = assign_prevalence(&dp2, &p, &mean, 0).unwrap();
        assert!(close(a[&1].p_tilde_inf, 0.4505, 1e-15));

        let zero = UPolicy::only(URule::Fixed { value: 0.0 }).unwrap();
        let a = assign_prevalence(&dp2, &p, &zero, 0).unwrap();
        assert_eq!(a[&1].p_tilde_inf, 0.0);

        let bad = UPolicy {
            rule: URule::Fixed { value: 2.0 },
            fallback: URule::Mean { midpoint: 0.5 },
        };
        assert!(matches!(
            assign_prevalence(&dp2, &p, &bad, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn plugin_falls_back_without_tested_individuals() {
        let dp1 = counts(3063, &[0, 306], &[0, 0]);
        let p = BTreeMap::from([(1, 0.9)]);
        let a = assign_prevalence(&dp1, &p, &UPolicy::default(), 0).unwrap();
        assert_eq!(a[&1].u, 0.5);
        assert!(a[&1].fallback);
        assert_eq!(a[&1].source, USource::Mean);
    }

    #[test]
    fn uniform_u_is_seeded_and_in_range() {
        let c = counts(1000, &[1, 1, 1, 5], &[9, 9, 9, 5]);
        let p = BTreeMap::from([(1, 0.3), (2, 0.3), (3, 0.3)]);
        let policy: UPolicy = "uniform:0,0.5".parse().unwrap();
        let a = assign_prevalence(&c, &p, &policy, 7).unwrap();
        let b = assign_prevalence(&c, &p, &policy, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.values().all(|x| (0.0..0.5).contains(&x.u)));
        let other = assign_prevalence(&c, &p, &policy, 8).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn collapse_examples() {
        let toy = toy_counts();
        let part = SeverityPartition::top_only(4).unwrap();
        let c = collapse(&toy, &part).unwrap();
        assert_eq!(c.positives_all(), &[8050, 81000]);
        assert_eq!(c.negatives_all(), &[9950, 9000]);
        assert_eq!(c.tested_total(), toy.tested_total());
        assert_eq!(c.census(), toy.census());

        let two = counts(3063, &[11, 306], &[90, 0]);
        assert_eq!(collapse(&two, &SeverityPartition::top_only(2).unwrap()).unwrap(), two);

        let part = SeverityPartition::new(4, [1, 2], [], [3, 4]).unwrap();
        assert_eq!(collapse(&toy, &part).unwrap().tested(2), 105_000);
    }

    #[test]
    fn correct_toy() {
        let cfg = CorrectionConfig::for_categories(4).unwrap();
        let est = correct(&toy_counts(), &cfg).unwrap();
        // exact arithmetic: 0.09 + 0.91/3 * (0.1 + 0.2 + 0.5)
        assert!(close(est.total_prevalence, 0.09 + 0.91 / 3.0 * 0.8, 1e-12));
        assert!(close(est.total_prevalence, 0.3347, 0.01));
        assert!(close(est.p_tilde.iter().sum::<f64>(), 1.0, 1e-12));
        assert_eq!(est.u_used[&4], 1.0);
        assert_eq!(est.trace[3].proportion_rule, "high");
        assert_eq!(est.trace[0].proportion_rule, "maxent");
    }

    #[test]
    fn correct_two_category_protocols() {
        let cfg = CorrectionConfig::for_categories(2).unwrap();
        let dp2 = correct(&counts(3063, &[11, 306], &[90, 0]), &cfg).unwrap();
        assert!(close(dp2.total_prevalence, 0.197, 2e-3));
        let l2 = correct(&counts(5824, &[10, 289], &[85, 0]), &cfg).unwrap();
        assert!(close(l2.total_prevalence, 0.149, 2e-3));
    }

    #[test]
    fn partition_size_must_match_counts() {
        let cfg = CorrectionConfig::for_categories(3).unwrap();
        assert!(matches!(
            correct(&counts(100, &[1, 1], &[1, 1]), &cfg),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn all_high_partition() {
        let c = counts(10, &[3, 2], &[1, 4]);
        let cfg = CorrectionConfig {
            partition: SeverityPartition::new(2, [], [], [1, 2]).unwrap(),
            ..CorrectionConfig::for_categories(2).unwrap()
        };
        // 10 of 10 tested: p₊ = 1, nothing left to redistribute
        let est = correct(&c, &cfg).unwrap();
        assert!(close(est.p_tilde.iter().sum::<f64>(), 1.0, 1e-12));

        let c = counts(20, &[3, 2], &[1, 4]);
        assert!(matches!(correct(&c, &cfg), Err(Error::Partition(_))));
    }
}
