//! Published scenarios shipped with the crate: reconstructed tested counts
//! and population specs.

use crate::ingest::{parse_aggregate, parse_population_spec};
use crate::model::{PopulationSpec, TestedCounts};

pub const TOY_COUNTS: &str = include_str!("../data/toy.csv");
pub const TOY_SPEC: &str = include_str!("../data/toy.spec");
pub const DIAMOND_PRINCESS_SPEC: &str = include_str!("../data/diamond_princess.spec");
pub const LOMBARDY_SPEC: &str = include_str!("../data/lombardy.spec");

pub const DIAMOND_PRINCESS_CENSUS: u64 = 3063;
pub const LOMBARDY_CENSUS: u64 = 5824;
pub const TOY_CENSUS: u64 = 1_000_000;

/// Tested counts for protocols 1 to 4.
pub const DIAMOND_PRINCESS_COUNTS: [&str; 4] = [
    include_str!("../data/diamond_princess_p1.csv"),
    include_str!("../data/diamond_princess_p2.csv"),
    include_str!("../data/diamond_princess_p3.csv"),
    include_str!("../data/diamond_princess_p4.csv"),
];

pub const LOMBARDY_COUNTS: [&str; 4] = [
    include_str!("../data/lombardy_p1.csv"),
    include_str!("../data/lombardy_p2.csv"),
    include_str!("../data/lombardy_p3.csv"),
    include_str!("../data/lombardy_p4.csv"),
];

pub fn toy_spec() -> PopulationSpec {
    parse_population_spec(TOY_SPEC).expect("embedded toy spec is valid")
}

pub fn toy_counts() -> TestedCounts {
    parse_aggregate(TOY_COUNTS.as_bytes(), TOY_CENSUS).expect("embedded toy counts are valid")
}

pub fn diamond_princess_counts(protocol: usize) -> TestedCounts {
    parse_aggregate(
        DIAMOND_PRINCESS_COUNTS[protocol - 1].as_bytes(),
        DIAMOND_PRINCESS_CENSUS,
    )
    .expect("embedded counts are valid")
}

pub fn lombardy_counts(protocol: usize) -> TestedCounts {
    parse_aggregate(LOMBARDY_COUNTS[protocol - 1].as_bytes(), LOMBARDY_CENSUS)
        .expect("embedded counts are valid")
}
