//! `prevcorr`: bias-corrected prevalence estimation, simulation and
//! reproduction of the published scenarios.

mod envelope;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prevalence_core::correction::{correct, CorrectionConfig, PrevalenceEstimate};
use prevalence_core::ingest::{parse_aggregate, parse_linelist, parse_population_spec};
use prevalence_core::reproduce::{reproduce, reproduce_all, Case, Reproduction};
use prevalence_core::simulator::{run_monte_carlo, SimulationSummary};
use prevalence_core::variance::{covariance_matrix, VarianceEstimate};
use prevalence_core::{SampleMode, SeverityPartition, SimulationConfig, TestedCounts, UPolicy};
use serde::Serialize;

use envelope::{CliError, Envelope, Inputs};

#[derive(Parser)]
#[command(name = "prevcorr", version, about = "Correct symptom-driven testing bias in prevalence estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Naive and corrected prevalence from tested counts.
    Estimate(EstimateArgs),
    /// Monte Carlo bias and MSE of both estimators on a known population.
    Simulate(SimulateArgs),
    /// Recompute the published scenarios from the embedded fixtures.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Aggregate counts file (`category,tested_positive,tested_negative`).
    #[arg(long, required_unless_present = "linelist", conflicts_with = "linelist")]
    counts: Option<PathBuf>,
    /// Line-list file (`id,category,tested,result`), one row per individual.
    #[arg(long)]
    linelist: Option<PathBuf>,
    /// Census size N; required with --counts, defaults to the row count with --linelist.
    #[arg(long)]
    census_n: Option<u64>,
    /// Severity partition, e.g. `high=4;low=1,2,3`; defaults to the top category alone as high.
    #[arg(long)]
    partition: Option<String>,
    /// Infected-share policy: plugin[:fallback], mean[:m], uniform[:lo,hi] or fixed:v.
    #[arg(long, default_value = "plugin")]
    u_policy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the covariance matrix and total-prevalence variance.
    #[arg(long)]
    variance: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// Population spec file (TOML with M, N, p, test_prob).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    #[arg(long, default_value = "plugin")]
    u_policy: String,
    #[arg(long)]
    partition: Option<String>,
    /// Override the census size N of the spec.
    #[arg(long)]
    census_n: Option<u64>,
    /// Write per-replicate rows `replicate,naive,corrected,n_t` to this CSV file.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// toy, diamond-princess or lombardy; every case when omitted.
    #[arg(long)]
    case: Option<String>,
    /// Sampling protocol 1..=4 of a case study.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    protocol: Option<u8>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    /// Multinomial draw of the whole census, then binomial testing per cell.
    Exact,
    /// Independent draw of every individual.
    Individual,
}

impl From<Mode> for SampleMode {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Exact => SampleMode::MultinomialExact,
            Mode::Individual => SampleMode::PerIndividual,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut inputs = Inputs::from_args(std::env::args_os().skip(1));
    let mut warnings = Vec::new();
    let (name, outcome) = match &cli.command {
        Command::Estimate(args) => ("estimate", estimate(args, &mut inputs, &mut warnings)),
        Command::Simulate(args) => ("simulate", simulate(args, &mut inputs, &mut warnings)),
        Command::Reproduce(args) => ("reproduce", cmd_reproduce(args, &mut warnings)),
    };
    let csv = matches!(&cli.command, Command::Estimate(a) if a.format == Format::Csv);
    let envelope = Envelope::new(name, inputs.digest(), warnings);
    envelope.emit(outcome, csv)
}

/// Output of a successful command: the JSON result, or CSV text for
/// `estimate --format csv`.
enum Output {
    Json(serde_json::Value),
    Csv(String),
}

fn to_json<T: Serialize>(value: &T) -> Result<Output, CliError> {
    serde_json::to_value(value)
        .map(Output::Json)
        .map_err(|e| CliError::Compute(format!("serialising result: {e}")))
}

fn read_file(path: &Path, inputs: &mut Inputs) -> Result<Vec<u8>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    inputs.add_file(&bytes);
    Ok(bytes)
}

fn partition_for(text: Option<&str>, m: usize) -> Result<SeverityPartition, CliError> {
    match text {
        Some(t) => SeverityPartition::parse(t, m),
        None => SeverityPartition::top_only(m),
    }
    .map_err(|e| CliError::from_core("--partition", e))
}

fn policy_for(text: &str) -> Result<UPolicy, CliError> {
    text.parse().map_err(|e| CliError::from_core("--u-policy", e))
}

#[derive(Serialize)]
struct EstimateResult {
    census: u64,
    tested: u64,
    categories: usize,
    partition: String,
    u_policy: String,
    seed: u64,
    naive_prevalence: f64,
    estimate: PrevalenceEstimate,
    variance: Option<VarianceEstimate>,
    standard_error: Option<f64>,
}

fn load_counts(args: &EstimateArgs, inputs: &mut Inputs) -> Result<TestedCounts, CliError> {
    if let Some(path) = &args.counts {
        let census = args.census_n.ok_or_else(|| {
            CliError::Input("--census-n is required with --counts".to_string())
        })?;
        let bytes = read_file(path, inputs)?;
        parse_aggregate(bytes.as_slice(), census).map_err(|e| CliError::from_core(path, e))
    } else {
        let path = args.linelist.as_ref().expect("clap requires --counts or --linelist");
        let bytes = read_file(path, inputs)?;
        parse_linelist(bytes.as_slice(), args.census_n).map_err(|e| CliError::from_core(path, e))
    }
}

fn estimate(
    args: &EstimateArgs,
    inputs: &mut Inputs,
    warnings: &mut Vec<String>,
) -> Result<Output, CliError> {
    let counts = load_counts(args, inputs)?;
    let partition = partition_for(args.partition.as_deref(), counts.m())?;
    let u_policy = policy_for(&args.u_policy)?;
    let config = CorrectionConfig {
        partition: partition.clone(),
        u_policy,
        seed: args.seed,
        density_override: None,
    };
    let naive = counts.naive_prevalence().map_err(CliError::compute)?;
    let estimate = correct(&counts, &config).map_err(CliError::compute)?;
    for t in estimate.trace.iter().filter(|t| t.u_fallback) {
        warnings.push(format!(
            "category {}: nobody tested, infected share taken from fallback rule {}",
            t.category, u_policy.fallback
        ));
    }
    let variance = if args.variance {
        let ve = covariance_matrix(&counts, &partition)
            .and_then(|ve| ve.with_total_variance(&estimate.u_used))
            .map_err(CliError::compute)?;
        Some(ve)
    } else {
        None
    };
    let result = EstimateResult {
        census: counts.census(),
        tested: counts.tested_total(),
        categories: counts.m(),
        partition: partition.to_string(),
        u_policy: u_policy.to_string(),
        seed: args.seed,
        naive_prevalence: naive,
        standard_error: variance.as_ref().and_then(|v| v.total_variance).map(f64::sqrt),
        variance,
        estimate,
    };
    match args.format {
        Format::Json => to_json(&result),
        Format::Csv => estimate_csv(&result).map(Output::Csv),
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    quantity: &'a str,
    category: Option<usize>,
    value: f64,
}

/// Long format: one `quantity,category,value` row per number.
fn estimate_csv(r: &EstimateResult) -> Result<String, CliError> {
    let mut rows = vec![
        CsvRow { quantity: "naive_prevalence", category: None, value: r.naive_prevalence },
        CsvRow { quantity: "total_prevalence", category: None, value: r.estimate.total_prevalence },
        CsvRow { quantity: "p_plus", category: None, value: r.estimate.p_plus },
    ];
    for (i, (p, q)) in r.estimate.p_tilde.iter().zip(&r.estimate.p_tilde_inf).enumerate() {
        let s = i + 1;
        rows.push(CsvRow { quantity: "p_tilde", category: Some(s), value: *p });
        rows.push(CsvRow { quantity: "p_tilde_inf", category: Some(s), value: *q });
        rows.push(CsvRow { quantity: "u_used", category: Some(s), value: r.estimate.u_used[&s] });
    }
    if let Some(v) = r.variance.as_ref().and_then(|v| v.total_variance) {
        rows.push(CsvRow { quantity: "total_variance", category: None, value: v });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Compute(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Compute(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Compute(e.to_string()))
}

#[derive(Serialize)]
struct SimulateResult {
    census: u64,
    replicates: usize,
    seed: u64,
    mode: Mode,
    partition: String,
    u_policy: String,
    true_prevalence: f64,
    testing_rate: f64,
    summary: SimulationSummary,
}

fn simulate(
    args: &SimulateArgs,
    inputs: &mut Inputs,
    warnings: &mut Vec<String>,
) -> Result<Output, CliError> {
    let bytes = read_file(&args.spec, inputs)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Input(format!("{}: not UTF-8: {e}", args.spec.display())))?;
    let mut spec = parse_population_spec(text).map_err(|e| CliError::from_core(&args.spec, e))?;
    if let Some(n) = args.census_n {
        spec = spec.with_census(n).map_err(|e| CliError::from_core("--census-n", e))?;
    }
    warnings.extend(
        spec.validate_orderings()
            .violations
            .iter()
            .map(|v| format!("population spec: {v}")),
    );
    let partition = partition_for(args.partition.as_deref(), spec.m())?;
    let u_policy = policy_for(&args.u_policy)?;
    let config = SimulationConfig {
        spec,
        correction: CorrectionConfig {
            partition: partition.clone(),
            u_policy,
            seed: args.seed,
            density_override: None,
        },
        replicates: args.replicates,
        seed: args.seed,
        sample_mode: args.mode.into(),
    };
    let result = run_monte_carlo(&config).map_err(|e| CliError::from_core("simulate", e))?;
    if result.summary.skipped > 0 {
        warnings.push(format!(
            "{} of {} replicates tested nobody and were excluded from the summaries",
            result.summary.skipped, args.replicates
        ));
    }
    if let Some(path) = &args.dump {
        write_dump(path, &result.per_replicate)?;
    }
    to_json(&SimulateResult {
        census: config.spec.census(),
        replicates: args.replicates,
        seed: args.seed,
        mode: args.mode,
        partition: partition.to_string(),
        u_policy: u_policy.to_string(),
        true_prevalence: result.true_prevalence,
        testing_rate: result.testing_rate,
        summary: result.summary,
    })
}

fn write_dump(
    path: &Path,
    rows: &[prevalence_core::simulator::ReplicateOutcome],
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct DumpRow {
        replicate: usize,
        naive: Option<f64>,
        corrected: Option<f64>,
        n_t: u64,
    }
    let fail = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for r in rows {
        w.serialize(DumpRow {
            replicate: r.replicate,
            naive: r.naive,
            corrected: r.corrected,
            n_t: r.n_t,
        })
        .map_err(fail)?;
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn cmd_reproduce(args: &ReproduceArgs, warnings: &mut Vec<String>) -> Result<Output, CliError> {
    let report: Reproduction = match &args.case {
        Some(name) => {
            let case: Case = name.parse().map_err(|e| CliError::from_core("--case", e))?;
            reproduce(case, args.protocol).map_err(|e| CliError::from_core("--case", e))?
        }
        None if args.protocol.is_some() => {
            return Err(CliError::Input("--protocol needs --case".to_string()))
        }
        None => reproduce_all().map_err(CliError::compute)?,
    };
    for check in &report.checks {
        eprintln!("{check}");
        if let Some(note) = &check.note {
            let proto = check.protocol.map(|p| format!(" protocol {p}")).unwrap_or_default();
            warnings.push(format!("{}{proto} {}: {note}", check.case, check.quantity));
        }
    }
    if !report.all_pass {
        let failing: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.to_string())
            .collect();
        return Err(CliError::Compute(format!(
            "{} check(s) outside tolerance: {}",
            failing.len(),
            failing.join("; ")
        )));
    }
    to_json(&report)
}
