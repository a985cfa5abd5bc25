use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use csgopt::linesearch::LineSearchConfig;
use csgopt_bench::experiment::summary_text;
use csgopt_bench::spec::{default_line_search, parse_grid};
use csgopt_bench::{
    emit_output, run_experiment, thread_count, BenchError, ExperimentKind, Format, OptimizerKind,
    ProblemKind, SpecOverrides,
};

/// Runs the CSG benchmark experiments and writes plot-ready quantile data.
///
/// Settings come from the experiment defaults, then an optional JSON config
/// file, then the flags below. CSGOPT_THREADS caps the worker pool.
#[derive(Debug, Parser)]
#[command(name = "csgopt", version)]
struct Cli {
    /// Experiment to run (may instead come from --config).
    experiment: Option<ExperimentKind>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Base seed; replicate r uses stream r of it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (parent directories are created).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Constant steps, comma-separated or log:LO:HI:N / lin:LO:HI:N.
    #[arg(long, value_name = "LIST")]
    tau: Option<String>,
    /// tau0 values of the stability grid.
    #[arg(long, value_name = "SPEC")]
    tau0_grid: Option<String>,
    /// d values of the stability grid.
    #[arg(long, value_name = "SPEC")]
    d_grid: Option<String>,
    /// Optimizers to run; repeat or comma-separate.
    #[arg(long, value_enum, value_delimiter = ',')]
    optimizer: Vec<OptimizerKind>,
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    /// Use the replicate counts of the original studies.
    #[arg(long)]
    full_scale: bool,
    /// JSON file with any subset of the spec fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Maximum line-search trials per iteration.
    #[arg(long)]
    max_trials: Option<usize>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// Non-monotone memory of the decrease test.
    #[arg(long)]
    memory: Option<usize>,
    /// Constant initial trial step of bCSG.
    #[arg(long)]
    bcsg_eta: Option<f64>,
    /// Suppress the summary on standard output.
    #[arg(long, short)]
    quiet: bool,
}

fn grid(s: &Option<String>) -> Result<Option<Vec<f64>>, BenchError> {
    s.as_deref().map(parse_grid).transpose()
}

fn overrides(cli: &Cli, base: Option<LineSearchConfig>) -> Result<SpecOverrides, BenchError> {
    let line_flags = cli.max_trials.is_some() || cli.c1.is_some() || cli.c2.is_some() || cli.memory.is_some();
    let line_search = line_flags.then(|| {
        let b = base.unwrap_or_else(default_line_search);
        LineSearchConfig {
            max_trials: cli.max_trials.unwrap_or(b.max_trials),
            c1: cli.c1.unwrap_or(b.c1),
            c2: cli.c2.unwrap_or(b.c2),
            memory: cli.memory.unwrap_or(b.memory),
        }
    });
    Ok(SpecOverrides {
        experiment: cli.experiment,
        replicates: cli.replicates,
        iters: cli.iters,
        base_seed: cli.seed,
        taus: grid(&cli.tau)?,
        tau0_grid: grid(&cli.tau0_grid)?,
        d_grid: grid(&cli.d_grid)?,
        optimizers: (!cli.optimizer.is_empty()).then(|| cli.optimizer.clone()),
        problem: cli.problem,
        line_search,
        bcsg_eta: cli.bcsg_eta,
        output_path: cli.out.clone(),
        format: cli.format,
        full_scale: cli.full_scale.then_some(true),
        ..Default::default()
    })
}

fn load_config(path: &PathBuf) -> Result<SpecOverrides, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Usage(format!("{}: {e}", path.display())))
}

fn main_inner(cli: Cli) -> Result<(), BenchError> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => SpecOverrides::default(),
    };
    let flags = overrides(&cli, file.line_search)?;
    let spec = file.merged(flags).resolve()?;
    let threads = thread_count()?;
    let report = run_experiment(&spec, threads)?;
    emit_output(&report, spec.format, &spec.output_path)?;
    if !cli.quiet {
        print!("{}", summary_text(&report));
        println!("wrote {}", spec.output_path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("csgopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
