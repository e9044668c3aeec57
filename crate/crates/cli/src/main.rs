use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "isingcomp", version, about = "Learned edge contraction for Ising models")]
struct Cli {
    /// Worker threads for per-instance fan-out.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Generate a labeled dataset of random instances.
    Gen(GenArgs),
    /// Label every edge of one graph with the exact oracle.
    Label(LabelArgs),
    /// Train an edge classifier on a dataset.
    Train(TrainArgs),
    /// Compress a graph with a trained model.
    Compress(CompressArgs),
    /// Solve a graph, optionally lifting the solution through a log.
    Solve(SolveArgs),
    /// Evaluate compression methods on a dataset.
    Eval(EvalArgs),
    /// Compare analytic and numeric gradients.
    GradCheck(GradCheckArgs),
    /// Convert a DIMACS CNF formula to an Ising graph.
    Sat2ising(SatArgs),
    /// Compress a graph with random contractions.
    Baseline(BaselineArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long, value_delimiter = ',', default_value = "er,ba,ws")]
    topology: Vec<isingcomp::datagen::Topology>,
    /// Sizes as `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "2..12", value_parser = parse_sizes)]
    sizes: Sizes,
    /// Average-degree grid.
    #[arg(long, value_delimiter = ',', default_value = "2,4,11")]
    degrees: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    per_config: u32,
    #[arg(long, default_value_t = 0.1)]
    ws_beta: f64,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = isingcomp::oracle::DEFAULT_CAP)]
    oracle_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "ISINGCOMP_DATASET")]
    out: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct Sizes(Vec<u32>);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u32 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let b: u32 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok(Sizes((a..=b).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Sizes)
}

#[derive(Args, Debug, Serialize)]
struct LabelArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = isingcomp::oracle::DEFAULT_CAP)]
    cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum WeightingArg {
    Softmax,
    Power,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long, env = "ISINGCOMP_DATASET")]
    dataset: PathBuf,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Weight of the confidence-weighted term in the loss.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = WeightingArg::Softmax)]
    weighting: WeightingArg,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Exponent for power weighting (even, >= 2).
    #[arg(long, default_value_t = 2)]
    power: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for checkpoint.json and curve.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize, Clone, Copy)]
#[group(required = true, multiple = false)]
struct TargetArgs {
    /// Fraction of spins to keep.
    #[arg(long)]
    target_nodes: Option<f64>,
    /// Fraction of edges to keep.
    #[arg(long)]
    target_edges: Option<f64>,
    /// Absolute number of spins to keep.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum RuleArg {
    Confidence,
    Entropy,
}

#[derive(Args, Debug, Serialize)]
struct CompressArgs {
    #[arg(long, env = "ISINGCOMP_MODEL")]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, value_enum, default_value_t = RuleArg::Confidence)]
    rule: RuleArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SolverArg {
    Exact,
    Sa,
}

#[derive(Args, Debug, Serialize, Clone, Copy)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
    solver: SolverArg,
    #[arg(long, default_value_t = 2000)]
    sweeps: usize,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0.01)]
    t_cold: f64,
    #[arg(long)]
    t_hot: Option<f64>,
    #[arg(long, default_value_t = isingcomp::oracle::DEFAULT_CAP)]
    cap: usize,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Contraction log used to lift the solution to the original spins.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SplitArg {
    Train,
    Val,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Gnn,
    Random,
    Oracle,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long, env = "ISINGCOMP_DATASET")]
    dataset: PathBuf,
    /// Checkpoint to evaluate; repeat or comma-separate for a comparison.
    #[arg(long = "model", alias = "models", value_delimiter = ',', env = "ISINGCOMP_MODEL")]
    models: Vec<PathBuf>,
    /// Fractions of spins to keep, e.g. 0.875,0.75,0.5,0.25.
    #[arg(long, value_delimiter = ',', default_value = "0.875,0.75,0.5,0.25")]
    targets: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gnn,random")]
    methods: Vec<MethodArg>,
    #[arg(long, value_enum, default_value_t = SplitArg::Val)]
    split: SplitArg,
    /// Restrict to these sizes.
    #[arg(long, value_parser = parse_sizes)]
    sizes: Option<Sizes>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Record wall-clock runtime (makes outputs non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct GradCheckArgs {
    #[arg(long, env = "ISINGCOMP_DATASET")]
    dataset: PathBuf,
    /// Number of random parameter points.
    #[arg(long, default_value_t = 10)]
    points: usize,
    /// Number of graphs per point.
    #[arg(long, default_value_t = 5)]
    graphs: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SatArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Append the equality gadget for variables `i,j` before converting.
    #[arg(long, value_parser = parse_pair)]
    gadget: Option<(u32, u32)>,
    /// Report whether all satisfying assignments have x_i = x_j.
    #[arg(long, value_parser = parse_pair)]
    check: Option<(u32, u32)>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `i,j`, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Args, Debug, Serialize)]
struct BaselineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| commands::run(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain into one line, skipping causes whose text the
/// previous message already includes.
fn one_line(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if out.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}
