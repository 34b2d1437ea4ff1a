#![allow(dead_code)]

pub mod props;

use prevalence_core::correction::URule;
use prevalence_core::{PopulationSpec, SeverityPartition, TestedCounts, UPolicy};
use proptest::prelude::*;

/// Counts with `2..=6` categories, at least one tested individual and a
/// census at least as large as the sample.
pub fn counts_strategy() -> impl Strategy<Value = TestedCounts> {
    (2usize..=6)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(0u64..2_000, m),
                prop::collection::vec(0u64..2_000, m),
                0u64..1_000_000,
            )
        })
        .prop_filter_map("empty sample", |(pos, neg, extra)| {
            let nt: u64 = pos.iter().chain(&neg).sum();
            (nt > 0).then(|| TestedCounts::new(nt + extra, pos, neg).unwrap())
        })
}

/// A valid partition of `1..=m`: category `m` is always high and category 1
/// never is, the rest land in any group.
pub fn partition_strategy(m: usize) -> impl Strategy<Value = SeverityPartition> {
    prop::collection::vec(0u8..3, m).prop_map(move |groups| {
        let mut low = vec![1];
        let mut middle = vec![];
        let mut high = vec![m];
        for s in 2..m {
            match groups[s - 1] {
                0 => low.push(s),
                1 => middle.push(s),
                _ => high.push(s),
            }
        }
        SeverityPartition::new(m, low, middle, high).unwrap()
    })
}

pub fn rule_strategy() -> impl Strategy<Value = URule> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(|midpoint| URule::Mean { midpoint }),
        (0.0..=1.0f64).prop_map(|value| URule::Fixed { value }),
        (0.0..0.5f64, 0.5..=1.0f64).prop_map(|(lo, hi)| URule::Uniform { lo, hi }),
    ]
}

pub fn policy_strategy() -> impl Strategy<Value = UPolicy> {
    (any::<bool>(), rule_strategy(), rule_strategy()).prop_map(|(plugin, rule, fallback)| {
        if plugin {
            UPolicy::new(URule::PlugIn, fallback).unwrap()
        } else {
            UPolicy::only(rule).unwrap()
        }
    })
}

/// Normalised random population with `2..=6` categories.
pub fn spec_strategy() -> impl Strategy<Value = PopulationSpec> {
    (2usize..=6)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(1u32..10_000, 2 * m),
                prop::collection::vec(0.0..=1.0f64, 2 * m),
                1u64..10_000_000,
            )
        })
        .prop_map(|(weights, test_prob, n)| {
            let total: f64 = weights.iter().map(|&w| w as f64).sum();
            let props = weights.iter().map(|&w| w as f64 / total).collect();
            PopulationSpec::new(n, props, test_prob).unwrap()
        })
}
