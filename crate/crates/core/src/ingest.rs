//! On-disk formats.
//!
//! Aggregate counts and line lists are comma-separated text with a mandatory
//! header; lines starting with `#` are comments. Population specs are TOML
//! with keys `M`, `N`, `p` and `test_prob` (per-cell arrays ordered
//! `(1,0), (1,1), (2,0), (2,1), ...`).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PopulationSpec, TestedCounts};

pub const AGGREGATE_HEADER: [&str; 3] = ["category", "tested_positive", "tested_negative"];
pub const LINELIST_HEADER: [&str; 4] = ["id", "category", "tested", "result"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub category: usize,
    pub tested_positive: u64,
    pub tested_negative: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineListRecord {
    pub id: String,
    pub category: usize,
    pub tested: bool,
    /// Present iff `tested`.
    pub result: Option<bool>,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::parse(line, format!("expected {expected_len} fields, found {len}")),
        other => Error::parse(line, format!("{other:?}")),
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_error)?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        let line = header.position().map(|p| p.line()).unwrap_or(1);
        return Err(Error::parse(
            line,
            format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(value: &str, name: &str, line: u64) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(line, format!("{name} {value:?} is not a non-negative integer")))
}

fn category(value: &str, line: u64) -> Result<usize> {
    if value.is_empty() {
        return Err(Error::parse(line, "missing symptom category"));
    }
    match field::<usize>(value, "category", line)? {
        0 => Err(Error::parse(line, "categories are numbered from 1")),
        s => Ok(s),
    }
}

/// Reads `category,tested_positive,tested_negative` rows.
pub fn read_aggregate_records<R: Read>(input: R) -> Result<Vec<AggregateRecord>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &AGGREGATE_HEADER)?;
    let mut seen = BTreeMap::new();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let record = AggregateRecord {
            category: category(&row[0], line)?,
            tested_positive: field(&row[1], "tested_positive", line)?,
            tested_negative: field(&row[2], "tested_negative", line)?,
        };
        if let Some(first) = seen.insert(record.category, line) {
            return Err(Error::parse(
                line,
                format!("duplicate category {} (first on line {first})", record.category),
            ));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Validation("no records".into()));
    }
    Ok(records)
}

/// Aggregate counts file to [`TestedCounts`]. `M` is the largest category
/// listed; unlisted categories get zero counts.
pub fn parse_aggregate<R: Read>(input: R, census_n: u64) -> Result<TestedCounts> {
    let records = read_aggregate_records(input)?;
    let m = records.iter().map(|r| r.category).max().unwrap_or(0);
    let mut pos = vec![0; m];
    let mut neg = vec![0; m];
    for r in &records {
        pos[r.category - 1] = r.tested_positive;
        neg[r.category - 1] = r.tested_negative;
    }
    TestedCounts::new(census_n, pos, neg)
}

/// Writes every category `1..=M`, zero rows included.
pub fn serialize_aggregate(counts: &TestedCounts) -> String {
    let mut out = AGGREGATE_HEADER.join(",");
    out.push('\n');
    for s in 1..=counts.m() {
        out.push_str(&format!(
            "{s},{},{}\n",
            counts.positives(s),
            counts.negatives(s)
        ));
    }
    out
}

fn boolean(value: &str, name: &str, line: u64) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Ok(true),
        "false" | "0" | "no" | "n" => Ok(false),
        _ => Err(Error::parse(line, format!("{name} {value:?} is not a boolean"))),
    }
}

fn test_result(value: &str, line: u64) -> Result<Option<bool>> {
    match value.to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "positive" | "pos" | "+" => Ok(Some(true)),
        "negative" | "neg" | "-" => Ok(Some(false)),
        _ => boolean(value, "result", line).map(Some),
    }
}

/// Reads `id,category,tested,result` rows, one per individual.
pub fn read_linelist_records<R: Read>(input: R) -> Result<Vec<LineListRecord>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &LINELIST_HEADER)?;
    let mut ids = BTreeSet::new();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "missing id"));
        }
        let record = LineListRecord {
            category: category(&row[1], line)?,
            tested: boolean(&row[2], "tested", line)?,
            result: test_result(&row[3], line)?,
            id,
        };
        match (record.tested, record.result) {
            (true, None) => {
                return Err(Error::parse(line, format!("tested row {:?} has no result", record.id)))
            }
            (false, Some(_)) => {
                return Err(Error::parse(
                    line,
                    format!("untested row {:?} carries a result", record.id),
                ))
            }
            _ => {}
        }
        if !ids.insert(record.id.clone()) {
            return Err(Error::parse(line, format!("duplicate id {:?}", record.id)));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Validation("no records".into()));
    }
    Ok(records)
}

/// Line list to [`TestedCounts`]. Without `census_n` the file is taken to be
/// the whole census (`N` = number of rows).
pub fn parse_linelist<R: Read>(input: R, census_n: Option<u64>) -> Result<TestedCounts> {
    let records = read_linelist_records(input)?;
    let rows = records.len() as u64;
    let n = match census_n {
        Some(n) if n < rows => {
            return Err(Error::Validation(format!(
                "census N = {n} is smaller than the {rows} individuals listed"
            )))
        }
        Some(n) => n,
        None => rows,
    };
    let m = records.iter().map(|r| r.category).max().unwrap_or(0);
    let mut pos = vec![0; m];
    let mut neg = vec![0; m];
    for r in records.iter().filter(|r| r.tested) {
        if r.result == Some(true) {
            pos[r.category - 1] += 1;
        } else {
            neg[r.category - 1] += 1;
        }
    }
    TestedCounts::new(n, pos, neg)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: u64,
    p: Vec<f64>,
    test_prob: Vec<f64>,
}

fn line_of(text: &str, offset: usize) -> u64 {
    text[..offset.min(text.len())].matches('\n').count() as u64 + 1
}

/// Parses a TOML population spec. Proportions must already sum to one
/// (within [`crate::model::SIMPLEX_TOLERANCE`]); nothing is renormalised.
pub fn parse_population_spec(text: &str) -> Result<PopulationSpec> {
    let file: SpecFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        Error::parse(line, e.message().to_string())
    })?;
    if file.p.len() != 2 * file.m {
        return Err(Error::Validation(format!(
            "M = {} needs {} cell proportions, found {}",
            file.m,
            2 * file.m,
            file.p.len()
        )));
    }
    if file.test_prob.len() != 2 * file.m {
        return Err(Error::Validation(format!(
            "M = {} needs {} testing probabilities, found {}",
            file.m,
            2 * file.m,
            file.test_prob.len()
        )));
    }
    PopulationSpec::new(file.n, file.p, file.test_prob)
}

pub fn serialize_population_spec(spec: &PopulationSpec) -> String {
    let file = SpecFile {
        m: spec.m(),
        n: spec.census(),
        p: spec.cell_props().to_vec(),
        test_prob: spec.test_probs().to_vec(),
    };
    toml::to_string(&file).expect("spec serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn protocol_two_counts() {
        let text = "category,tested_positive,tested_negative\n2,306,0\n1,11,90\n";
        let c = parse_aggregate(text.as_bytes(), 3063).unwrap();
        assert_eq!(c.positives_all(), &[11, 306]);
        assert_eq!(c.negatives_all(), &[90, 0]);
        assert_eq!(c.tested_total(), 407);
        assert_eq!(c.census(), 3063);
    }

    #[test]
    fn empty_body_has_no_records() {
        let text = "# nothing here\ncategory,tested_positive,tested_negative\n";
        let err = parse_aggregate(text.as_bytes(), 10).unwrap_err();
        assert_eq!(err, Error::Validation("no records".into()));
    }

    #[test]
    fn toy_counts_file() {
        let c = parse_aggregate(fixtures::TOY_COUNTS.as_bytes(), 1_000_000).unwrap();
        assert_eq!(c.tested_total(), 108_000);
        assert_eq!(c, fixtures::toy_counts());
    }

    #[test]
    fn aggregate_errors_name_the_line() {
        let dup = "category,tested_positive,tested_negative\n1,1,1\n2,1,1\n1,0,0\n";
        match parse_aggregate(dup.as_bytes(), 100) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
        let bad = "category,tested_positive,tested_negative\n1,1.5,1\n";
        assert!(matches!(
            parse_aggregate(bad.as_bytes(), 100),
            Err(Error::Parse { line: 2, .. })
        ));
        let neg = "category,tested_positive,tested_negative\n1,-1,1\n";
        assert!(matches!(parse_aggregate(neg.as_bytes(), 100), Err(Error::Parse { .. })));
        let short = "category,tested_positive,tested_negative\n1,1\n";
        assert!(matches!(parse_aggregate(short.as_bytes(), 100), Err(Error::Parse { .. })));
        let header = "cat,pos,neg\n1,1,1\n";
        assert!(matches!(
            parse_aggregate(header.as_bytes(), 100),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn aggregate_exceeding_census() {
        let text = "category,tested_positive,tested_negative\n1,5,5\n2,5,0\n";
        assert!(matches!(
            parse_aggregate(text.as_bytes(), 10),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn missing_categories_are_zero() {
        let text = "category,tested_positive,tested_negative\n3,4,1\n";
        let c = parse_aggregate(text.as_bytes(), 100).unwrap();
        assert_eq!(c.m(), 3);
        assert_eq!(c.tested(1), 0);
        assert_eq!(c.tested(2), 0);
    }

    #[test]
    fn small_line_list() {
        let text = "id,category,tested,result\n\
                    a,2,true,positive\n\
                    b,2,true,positive\n\
                    c,1,false,\n\
                    d,1,false,\n\
                    e,2,false,\n";
        let c = parse_linelist(text.as_bytes(), None).unwrap();
        assert_eq!(c.census(), 5);
        assert_eq!(c.tested_total(), 2);
        assert_eq!(c.positives(2), 2);
    }

    #[test]
    fn line_list_errors() {
        let missing = "id,category,tested,result\na,2,true,\nb,1,false,\n";
        assert!(matches!(
            parse_linelist(missing.as_bytes(), None),
            Err(Error::Parse { line: 2, .. })
        ));
        let extra = "id,category,tested,result\na,2,false,negative\nb,1,false,\n";
        assert!(parse_linelist(extra.as_bytes(), None).is_err());
        let dup = "id,category,tested,result\na,2,true,1\na,1,false,\n";
        assert!(parse_linelist(dup.as_bytes(), None).is_err());
        let unknown = "id,category,tested,result\na,,true,1\nb,2,false,\n";
        assert!(parse_linelist(unknown.as_bytes(), None).is_err());
        let ok = "id,category,tested,result\na,2,true,1\nb,1,false,\n";
        assert!(parse_linelist(ok.as_bytes(), Some(1)).is_err());
        assert_eq!(parse_linelist(ok.as_bytes(), Some(50)).unwrap().census(), 50);
    }

    #[test]
    fn ship_line_list() {
        let mut text = String::from("id,category,tested,result\n");
        let mut id = 0;
        for (cat, positive, count) in [(2, true, 306), (1, true, 328), (1, false, 2429)] {
            for _ in 0..count {
                id += 1;
                text.push_str(&format!(
                    "p{id},{cat},true,{}\n",
                    if positive { "positive" } else { "negative" }
                ));
            }
        }
        let c = parse_linelist(text.as_bytes(), None).unwrap();
        assert_eq!(c.census(), 3063);
        assert_eq!(c.positives_all().iter().sum::<u64>(), 634);
    }

    #[test]
    fn shipped_population_specs() {
        let toy = parse_population_spec(fixtures::TOY_SPEC).unwrap();
        assert!((toy.testing_rate() - 0.108).abs() < 1e-15);
        assert_eq!(toy, fixtures::toy_spec());

        let lombardy = parse_population_spec(fixtures::LOMBARDY_SPEC).unwrap();
        let truth = crate::simulator::true_prevalence(&lombardy);
        assert!((truth - 932.0 / 5824.0).abs() < 1e-12);
        assert!((truth - 0.16).abs() < 1e-3);
        assert!((lombardy.cell_props().iter().sum::<f64>() - 1.0).abs() <= 1e-12);

        let ship = parse_population_spec(fixtures::DIAMOND_PRINCESS_SPEC).unwrap();
        assert!((crate::simulator::true_prevalence(&ship) - 634.0 / 3063.0).abs() < 1e-12);
    }

    #[test]
    fn population_spec_errors() {
        let short = "M = 2\nN = 10\np = [0.2, 0.2, 0.2, 0.3]\ntest_prob = [0.1, 0.1, 0.1, 0.1]\n";
        match parse_population_spec(short) {
            Err(Error::Validation(msg)) => assert!(msg.contains("deficit"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let negative =
            "M = 2\nN = 10\np = [-0.1, 0.3, 0.4, 0.4]\ntest_prob = [0.1, 0.1, 0.1, 0.1]\n";
        assert!(matches!(parse_population_spec(negative), Err(Error::Validation(_))));
        let wrong_len = "M = 3\nN = 10\np = [0.25, 0.25, 0.25, 0.25]\ntest_prob = [0.1, 0.1, 0.1, 0.1]\n";
        assert!(matches!(parse_population_spec(wrong_len), Err(Error::Validation(_))));
        let syntax = "M = 2\nN = ten\n";
        assert!(matches!(
            parse_population_spec(syntax),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn population_spec_round_trip() {
        let spec = fixtures::toy_spec();
        let text = serialize_population_spec(&spec);
        assert_eq!(parse_population_spec(&text).unwrap(), spec);
    }
}
