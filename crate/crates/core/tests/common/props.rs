//! Invariants shared by the property suite and the acceptance gate.

use std::collections::BTreeMap;

use prevalence_core::correction::{collapse, correct, CorrectionConfig, URule};
use prevalence_core::ingest::{
    parse_aggregate, parse_population_spec, serialize_aggregate, serialize_population_spec,
};
use prevalence_core::variance::{covariance_matrix, total_prevalence_variance};
use prevalence_core::{PopulationSpec, SeverityPartition, TestedCounts, UPolicy};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

type Check = Result<(), TestCaseError>;

fn config(partition: SeverityPartition, u_policy: UPolicy, seed: u64) -> CorrectionConfig {
    CorrectionConfig {
        partition,
        u_policy,
        seed,
        density_override: None,
    }
}

pub fn density_simplex(counts: &TestedCounts, spec: &PopulationSpec) -> Check {
    let f = counts.empirical_density().unwrap();
    prop_assert!((f.categories.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    prop_assert!((f.cells.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    let naive = counts.naive_prevalence().unwrap();
    prop_assert!((0.0..=1.0).contains(&naive));
    if spec.testing_rate() > 0.0 {
        let g = spec.theoretical_biased_density().unwrap();
        prop_assert!((g.categories.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(g.categories.iter().all(|&v| v >= 0.0));
    }
    Ok(())
}

pub fn estimate_invariants(
    counts: &TestedCounts,
    partition: SeverityPartition,
    policy: UPolicy,
    seed: u64,
) -> Check {
    let cfg = config(partition, policy, seed);
    let est = correct(counts, &cfg).unwrap();
    prop_assert!((est.p_tilde.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    for (p, q) in est.p_tilde.iter().zip(&est.p_tilde_inf) {
        prop_assert!(0.0 <= *q && q <= p, "p̃ = {p}, p̃¹ = {q}");
    }
    prop_assert!((est.total_prevalence - est.p_tilde_inf.iter().sum::<f64>()).abs() <= 1e-12);
    prop_assert!((0.0..=1.0 + 1e-12).contains(&est.total_prevalence));
    // bit-identical on a rerun with the same seed
    let again = correct(counts, &cfg).unwrap();
    prop_assert_eq!(&est, &again);
    Ok(())
}

pub fn two_category_fast_path(counts: &TestedCounts, policy: UPolicy) -> Check {
    let counts = collapse(counts, &SeverityPartition::top_only(counts.m()).unwrap()).unwrap();
    let cfg = config(SeverityPartition::top_only(2).unwrap(), policy, 0);
    let est = correct(&counts, &cfg).unwrap();
    let f = counts.empirical_density().unwrap();
    let p2 = counts.sampling_fraction() * f.category(2);
    let p1 = 1.0 - p2;
    let u = est.u_used[&1];
    prop_assert_eq!(est.p_tilde[1], p2);
    prop_assert_eq!(est.p_tilde_inf[1], p2);
    prop_assert_eq!(est.p_tilde[0], p1);
    prop_assert_eq!(est.p_tilde_inf[0], u * p1);
    if policy.rule == URule::PlugIn && counts.tested(1) > 0 {
        prop_assert_eq!(u, counts.positives(1) as f64 / counts.tested(1) as f64);
    }
    Ok(())
}

pub fn collapse_consistency(counts: &TestedCounts, partition: SeverityPartition) -> Check {
    let full = correct(counts, &config(partition.clone(), UPolicy::default(), 0)).unwrap();
    let collapsed = collapse(counts, &partition).unwrap();
    prop_assert_eq!(collapsed.tested_total(), counts.tested_total());
    prop_assert_eq!(collapsed.census(), counts.census());
    let two = correct(
        &collapsed,
        &config(SeverityPartition::top_only(2).unwrap(), UPolicy::default(), 0),
    )
    .unwrap();
    prop_assert!((full.p_plus - two.p_plus).abs() <= 1e-12);
    Ok(())
}

pub fn monotone_in_u(counts: &TestedCounts, partition: SeverityPartition, a: f64, b: f64) -> Check {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let run = |u: f64| {
        let policy = UPolicy::only(URule::Fixed { value: u }).unwrap();
        correct(counts, &config(partition.clone(), policy, 0))
            .unwrap()
            .total_prevalence
    };
    prop_assert!(run(lo) <= run(hi));
    Ok(())
}

pub fn high_only_sample_bound(n_pos_high: u64, extra: u64, m: usize) -> Check {
    let mut pos = vec![0; m];
    pos[m - 1] = n_pos_high;
    let counts = TestedCounts::new(n_pos_high + extra, pos, vec![0; m]).unwrap();
    let est = correct(&counts, &CorrectionConfig::for_categories(m).unwrap()).unwrap();
    prop_assert_eq!(counts.naive_prevalence().unwrap(), 1.0);
    if extra > 0 {
        prop_assert!(est.total_prevalence < 1.0);
    }
    Ok(())
}

pub fn variance_identities(counts: &TestedCounts, partition: SeverityPartition, us: &[f64]) -> Check {
    let ve = covariance_matrix(counts, &partition).unwrap();
    prop_assert!((ve.b * ve.b - ve.a * ve.c).abs() <= 1e-14);
    prop_assert!(ve.sigma2_m >= 0.0);
    let u_used: BTreeMap<usize, f64> = (1..=counts.m())
        .map(|s| {
            let u = if partition.high().contains(&s) {
                1.0
            } else {
                us[s - 1]
            };
            (s, u)
        })
        .collect();
    let v = total_prevalence_variance(&ve, &u_used).unwrap();
    prop_assert!(v >= 0.0);

    // doubling the census quarters c and the total variance
    let doubled = TestedCounts::new(
        2 * counts.census(),
        counts.positives_all().to_vec(),
        counts.negatives_all().to_vec(),
    )
    .unwrap();
    let ve2 = covariance_matrix(&doubled, &partition).unwrap();
    prop_assert!((ve2.c * 4.0 - ve.c).abs() <= 1e-15 * ve.c.max(1e-300));
    let v2 = total_prevalence_variance(&ve2, &u_used).unwrap();
    prop_assert!((v2 * 4.0 - v).abs() <= 1e-12 * v.max(1e-300));
    Ok(())
}

pub fn aggregate_round_trip(counts: &TestedCounts) -> Check {
    let text = serialize_aggregate(counts);
    let back = parse_aggregate(text.as_bytes(), counts.census()).unwrap();
    prop_assert_eq!(&back, counts);
    Ok(())
}

pub fn spec_round_trip(spec: &PopulationSpec) -> Check {
    let text = serialize_population_spec(spec);
    let back = parse_population_spec(&text).unwrap();
    prop_assert_eq!(&back, spec);
    prop_assert_eq!(serialize_population_spec(&back), text);
    Ok(())
}
