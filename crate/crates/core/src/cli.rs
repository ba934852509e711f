//! Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::bench::{run_benchmark, A_SWEEP, summarize_rows, write_rows_csv, write_summary_csv, BenchConfig};
use crate::data::{decluster, load_csv, write_csv, ColumnRef, LoadConfig, NaPolicy, TimeSeriesPanel};
use crate::discovery::{causal_order, AlgoParams, DEFAULT_A, DEFAULT_EPSILON};
use crate::error::Error;
use crate::extremes::{
    estimate_scaling_init, estimate_scaling_scaled, estimate_scaling_unscaled, pit_frechet2,
    theoretical_max_scaling, theoretical_scaled_max_scaling, SampleMatrix,
};
use crate::graph::Dag;
use crate::lsem::{simulate, LsemModel};
use crate::metrics::{bootstrap_sid, full_dag_from_order, sid, summarize, write_bootstrap_csv};

#[derive(Debug, Parser)]
#[command(name = "extremal-order", version, about = "Causal orderings from extremal scalings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random model and a sample from it.
    Simulate(SimulateArgs),
    /// Estimate a causal order from a sample.
    Discover(DiscoverArgs),
    /// Estimate scalings of maxima for one (i, j, I) triple.
    Scalings(ScalingsArgs),
    /// Structural intervention distance between a true DAG and an estimate.
    Evaluate(EvaluateArgs),
    /// Seeded simulation sweep written as long-format CSV.
    Benchmark(BenchmarkArgs),
    /// Bootstrap distribution of the SID for one sample.
    Bootstrap(BootstrapArgs),
    /// Keep one day per window around successive maxima.
    Decluster(DeclusterArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is outside [0, 1]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn above_one(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 1.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must exceed 1"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be nonnegative"))
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("'{s}' is not a positive integer")),
    }
}

/// `auto` or a positive integer.
fn threshold(s: &str) -> Result<Option<usize>, String> {
    if s == "auto" {
        Ok(None)
    } else {
        at_least_one(s).map(Some)
    }
}

#[derive(Debug, Args)]
pub struct AlgoArgs {
    /// Scale factor applied to the candidate and identified nodes.
    #[arg(long, default_value_t = DEFAULT_A, value_parser = above_one)]
    pub a: f64,
    /// Relative selection tolerance.
    #[arg(long, default_value_t = DEFAULT_EPSILON, value_parser = nonnegative)]
    pub epsilon: f64,
    /// Number of upper order statistics; defaults to floor(n^0.4).
    #[arg(long, value_parser = at_least_one)]
    pub k: Option<usize>,
}

impl AlgoArgs {
    fn params(&self) -> AlgoParams {
        AlgoParams {
            a: self.a,
            epsilon: self.epsilon,
            k: self.k,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = at_least_one)]
    pub d: usize,
    /// Edge probability.
    #[arg(long, value_parser = probability)]
    pub p: f64,
    /// Tail index of the innovations.
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    pub alpha: f64,
    #[arg(long, value_parser = at_least_one)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Model JSON output.
    #[arg(long)]
    pub model: PathBuf,
    /// Sample CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleInput {
    /// Sample CSV (one column per node).
    #[arg(long)]
    pub samples: PathBuf,
    /// The sample file has no header line.
    #[arg(long)]
    pub no_header: bool,
}

impl SampleInput {
    fn load(&self) -> Result<SampleMatrix, CliError> {
        require_file(&self.samples)?;
        let cfg = LoadConfig {
            has_header: !self.no_header,
            ..Default::default()
        };
        Ok(load_csv(&self.samples, &cfg)?.to_sample()?)
    }
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub input: SampleInput,
    #[command(flatten)]
    pub algo: AlgoArgs,
    /// Recorded in the output.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ScalingsArgs {
    #[command(flatten)]
    pub input: SampleInput,
    #[arg(long)]
    pub i: usize,
    #[arg(long)]
    pub j: usize,
    /// Identified nodes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub set: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_A, value_parser = above_one)]
    pub a: f64,
    #[arg(long, value_parser = at_least_one)]
    pub k: Option<usize>,
    /// Model JSON; adds the exact values to the output.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// True DAG: model JSON or DAG text file.
    #[arg(long)]
    pub dag: PathBuf,
    /// Ordering JSON written by `discover`.
    #[arg(long, conflicts_with = "estimate", required_unless_present = "estimate")]
    pub ordering: Option<PathBuf>,
    /// Estimated DAG: model JSON or DAG text file.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_delimiter = ',', default_value = "10", value_parser = at_least_one)]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.05", value_parser = probability)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2", value_parser = positive)]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1000", value_parser = at_least_one)]
    pub n: Vec<usize>,
    /// Threshold counts; `auto` means floor(n^0.4).
    #[arg(long, value_delimiter = ',', default_value = "auto", value_parser = threshold)]
    pub k: Vec<Option<usize>>,
    #[arg(long, value_delimiter = ',', default_value = "1.3", value_parser = above_one)]
    pub a: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.4", value_parser = nonnegative)]
    pub epsilon: Vec<f64>,
    #[arg(long, default_value_t = 10, value_parser = at_least_one)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    /// Replace the --a grid with 1.0001, 1.15, 1.3, 1.5, 2.
    #[arg(long)]
    pub a_sweep: bool,
    #[arg(long)]
    pub no_gamma: bool,
    #[arg(long)]
    pub reversed_control: bool,
    /// Per-setting summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub input: SampleInput,
    /// True DAG: model JSON or DAG text file.
    #[arg(long)]
    pub dag: PathBuf,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long, default_value_t = 100, value_parser = at_least_one)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeclusterArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Window width in rows.
    #[arg(long, value_parser = at_least_one)]
    pub window: usize,
    /// Segment column (name or 1-based position) or a file of segment start rows.
    #[arg(long)]
    pub segments: Option<String>,
    /// Timestamp column (name or 1-based position).
    #[arg(long)]
    pub timestamp: Option<String>,
    #[arg(long, value_enum, default_value_t = NaArg::Error)]
    pub na: NaArg,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NaArg {
    Drop,
    Error,
}

/// Failure classes mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// A DAG from model JSON or the plain edge-list format.
pub fn read_dag(path: &Path) -> Result<Dag, CliError> {
    require_file(path)?;
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Ok(LsemModel::from_json(&text)?.dag().clone())
    } else {
        Ok(text.parse()?)
    }
}

#[derive(serde::Deserialize)]
struct OrderingFile {
    ordering: Vec<usize>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let model = LsemModel::random(args.d, args.p, args.alpha, &mut rng)?;
    let abar = model.coefficient_matrix().standardize(args.alpha)?;
    let x = simulate(&abar, args.n, args.alpha, &mut rng)?;
    std::fs::write(&args.model, model.to_json()? + "\n")?;
    let mut out = output(Some(&args.out))?;
    write_csv(&TimeSeriesPanel::from_sample(&x), &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_discover(args: &DiscoverArgs) -> Result<(), CliError> {
    let x = args.input.load()?;
    let mut result = causal_order(&x, &args.algo.params())?;
    result.seed = args.seed;
    match args.format {
        Format::Json => write_json(&result, args.out.as_deref()),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
            w.write_record(["position", "node"]).map_err(Error::from)?;
            for (pos, node) in result.ancestral_order().iter().enumerate() {
                w.write_record([(pos + 1).to_string(), node.to_string()])
                    .map_err(Error::from)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct ScalingReport {
    i: usize,
    j: usize,
    set: Vec<usize>,
    a: f64,
    k: usize,
    n: usize,
    scaled: f64,
    unscaled: f64,
    direct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_scaled: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_unscaled: Option<f64>,
}

fn cmd_scalings(args: &ScalingsArgs) -> Result<(), CliError> {
    let x = pit_frechet2(&args.input.load()?);
    let k = AlgoParams {
        a: args.a,
        epsilon: 0.0,
        k: args.k,
    }
    .resolve_k(x.n())?;
    let mut all = vec![args.i, args.j];
    all.extend_from_slice(&args.set);
    let (exact_scaled, exact_unscaled) = match &args.model {
        Some(path) => {
            require_file(path)?;
            let model = LsemModel::from_json(&std::fs::read_to_string(path)?)?;
            let abar = model.coefficient_matrix().standardize(model.alpha())?;
            (
                Some(theoretical_scaled_max_scaling(&abar, args.i, args.j, &args.set, args.a)?),
                Some(theoretical_max_scaling(&abar, &all)?),
            )
        }
        None => (None, None),
    };
    let report = ScalingReport {
        i: args.i,
        j: args.j,
        set: args.set.clone(),
        a: args.a,
        k,
        n: x.n(),
        scaled: estimate_scaling_scaled(&x, args.i, args.j, &args.set, args.a, k)?,
        unscaled: estimate_scaling_unscaled(&x, args.i, args.j, &args.set, args.a, k)?,
        direct: estimate_scaling_init(&x, &all, k)?,
        exact_scaled,
        exact_unscaled,
    };
    match args.format {
        Format::Json => write_json(&report, args.out.as_deref()),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
            w.write_record(["quantity", "value"]).map_err(Error::from)?;
            let mut rows = vec![
                ("scaled", report.scaled),
                ("unscaled", report.unscaled),
                ("direct", report.direct),
            ];
            rows.extend(exact_scaled.map(|v| ("exact_scaled", v)));
            rows.extend(exact_unscaled.map(|v| ("exact_unscaled", v)));
            for (name, v) in rows {
                w.write_record([name.to_string(), v.to_string()]).map_err(Error::from)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let truth = read_dag(&args.dag)?;
    let estimate = match (&args.ordering, &args.estimate) {
        (Some(path), _) => {
            require_file(path)?;
            let file: OrderingFile =
                serde_json::from_str(&std::fs::read_to_string(path)?).map_err(Error::from)?;
            let ancestral: Vec<usize> = file.ordering.into_iter().rev().collect();
            full_dag_from_order(&ancestral)?
        }
        (None, Some(path)) => read_dag(path)?,
        (None, None) => return Err(CliError::Usage("give --ordering or --estimate".into())),
    };
    let score = sid(&truth, &estimate)?;
    match args.format {
        Format::Json => write_json(&score, args.out.as_deref()),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
            w.serialize(score).map_err(Error::from)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let mut config = BenchConfig {
        ds: args.d.clone(),
        ps: args.p.clone(),
        alphas: args.alpha.clone(),
        ns: args.n.clone(),
        ks: args.k.clone(),
        a_values: args.a.clone(),
        epsilons: args.epsilon.clone(),
        replicates: args.replicates,
        seed: args.seed,
        gamma_baseline: !args.no_gamma,
        reversed_control: args.reversed_control,
    };
    if args.a_sweep {
        config.a_values = A_SWEEP.to_vec();
    }
    let rows = run_benchmark(&config)?;
    let mut out = output(args.out.as_deref())?;
    write_rows_csv(&rows, &mut out)?;
    out.flush()?;
    if let Some(path) = &args.summary {
        write_summary_csv(&summarize_rows(&rows), File::create(path)?)?;
    }
    Ok(())
}

fn cmd_bootstrap(args: &BootstrapArgs) -> Result<(), CliError> {
    let x = args.input.load()?;
    let truth = read_dag(&args.dag)?;
    let rows = bootstrap_sid(&x, &truth, &args.algo.params(), args.replicates, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    write_bootstrap_csv(&rows, &mut out)?;
    out.flush()?;
    let values: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
    if let Some(s) = summarize(&values) {
        log::info!("SID median {:.4}, IQR {:.4}", s.median, s.iqr());
    }
    Ok(())
}

fn parse_segment_starts(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| CliError::Usage(format!("bad segment start '{t}'")))
        })
        .collect()
}

fn cmd_decluster(args: &DeclusterArgs) -> Result<(), CliError> {
    require_file(&args.input)?;
    let mut cfg = LoadConfig {
        has_header: !args.no_header,
        na_policy: match args.na {
            NaArg::Drop => NaPolicy::Drop,
            NaArg::Error => NaPolicy::Error,
        },
        ..Default::default()
    };
    if let Some(ts) = &args.timestamp {
        cfg.timestamp_column = Some(ts.parse::<ColumnRef>()?);
    }
    if let Some(seg) = &args.segments {
        if Path::new(seg).is_file() {
            cfg.segment_starts = Some(parse_segment_starts(&std::fs::read_to_string(seg)?)?);
        } else {
            cfg.segment_column = Some(seg.parse::<ColumnRef>()?);
        }
    }
    let panel = load_csv(&args.input, &cfg)?;
    let out_panel = decluster(&panel, args.window)?;
    log::info!("declustering kept {} of {} rows", out_panel.n(), panel.n());
    let mut out = output(args.out.as_deref())?;
    write_csv(&out_panel, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Discover(a) => cmd_discover(a),
        Command::Scalings(a) => cmd_scalings(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Decluster(a) => cmd_decluster(a),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["x", "simulate", "--d", "4", "--p", "1.5", "--n", "10", "--seed", "1", "--model", "m", "--out", "o"]), 2);
        assert_eq!(run(["x", "discover", "--samples", "/nonexistent/file.csv"]), 2);
        assert_eq!(run(["x", "bogus"]), 2);
    }

    #[test]
    fn segment_start_parsing() {
        assert_eq!(parse_segment_starts("0\n92, 184").unwrap(), vec![0, 92, 184]);
        assert!(parse_segment_starts("0 x").is_err());
    }

    #[test]
    fn threshold_values() {
        assert_eq!(threshold("auto").unwrap(), None);
        assert_eq!(threshold("30").unwrap(), Some(30));
        assert!(threshold("0").is_err());
    }
}
