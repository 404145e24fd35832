//! `lisa`: simulate data, run divide-and-conquer BART samplers, report.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lisa_core::experiment::{
    method_label, prepare_replication, recombine, run_experiment, write_replication_data,
    DataSource,
};
use lisa_core::report::{build_report, table_coverage, table_fit, table_moves, write_report};
use lisa_core::{CombineRule, Generator};

use config::{DataSection, MethodSection, OneHot, RunSection};

#[derive(Parser, Debug)]
#[command(
    name = "lisa",
    version,
    about = "Divide-and-conquer Bayesian additive regression trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a train/test pair with its noise-free mean.
    Simulate(SimulateArgs),
    /// Sample every requested method and store chains and combined draws.
    Run(Box<RunArgs>),
    /// Summarize a finished run: tables, metrics and plot data.
    Report(ReportArgs),
    /// Re-merge a method's stored chains under another combination rule.
    Combine(CombineArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// friedman, piecewise or poly.
    #[arg(long, default_value = "friedman")]
    generator: String,
    /// Training rows.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// Noise variance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = config::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML file with [data], [run], [defaults] and [method.<label>] sections.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Simulate each replication from this generator.
    #[arg(long, help_heading = "Data")]
    generator: Option<String>,
    #[arg(long, help_heading = "Data")]
    n: Option<usize>,
    #[arg(long, help_heading = "Data")]
    n_test: Option<usize>,
    #[arg(long, help_heading = "Data")]
    sigma2: Option<f64>,
    /// CSV file with a header row, split into train and test.
    #[arg(long, help_heading = "Data")]
    data: Option<PathBuf>,
    #[arg(long, help_heading = "Data")]
    response: Option<String>,
    #[arg(long, help_heading = "Data")]
    test_fraction: Option<f64>,
    /// One-hot encode non-numeric columns: `auto` or a comma list of names.
    #[arg(long, help_heading = "Data")]
    one_hot: Option<String>,
    /// Directory written by `simulate`.
    #[arg(long, help_heading = "Data")]
    data_dir: Option<PathBuf>,

    /// Methods to run (full, lisa, modlisa, cmc); comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Shard count for the divide-and-conquer methods.
    #[arg(long)]
    k: Option<usize>,
    /// Sweeps per chain, burn-in included.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// uniform or inverse-variance.
    #[arg(long)]
    combine_rule: Option<String>,
    /// Concurrent chains; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
    /// Record training-set predictions at the first N rows only.
    #[arg(long)]
    eval_train_limit: Option<usize>,
    /// Rescale each shard's response to [-0.5, 0.5].
    #[arg(long)]
    standardize: bool,
    /// Include the SWAP move.
    #[arg(long)]
    swap: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Run directory.
    run_dir: PathBuf,
    /// Training rows for which ECDF series are written.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    ecdf_points: Vec<usize>,
}

#[derive(Args, Debug)]
struct CombineArgs {
    /// Run directory.
    run_dir: PathBuf,
    /// Label of the stored method to re-merge.
    #[arg(long)]
    method: String,
    #[arg(long)]
    combine_rule: String,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let generator: Generator = a.generator.parse().map_err(usage)?;
    if a.n == 0 || a.n_test == 0 {
        return Err(usage("--n and --n-test must be positive"));
    }
    // same streams as replication 0 of `run --generator ... --seed ...`
    let source = DataSource::Simulated {
        generator,
        n_train: a.n,
        n_test: a.n_test,
        sigma2: a.sigma2,
    };
    let data = prepare_replication(&source, a.seed).map_err(usage)?;
    let meta = vec![
        ("seed".to_string(), a.seed.to_string()),
        ("generator".to_string(), generator.name().to_string()),
    ];
    write_replication_data(&a.out, &data, &meta)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "wrote {} training and {} test rows ({} predictors) to {}",
        a.n,
        a.n_test,
        generator.dimension(),
        a.out.display()
    );
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let file = match &a.config {
        Some(p) => config::read_config(p).map_err(usage)?,
        None => config::ConfigFile::default(),
    };
    let data = DataSection {
        generator: a.generator,
        n_train: a.n,
        n_test: a.n_test,
        sigma2: a.sigma2,
        path: a.data,
        response: a.response,
        test_fraction: a.test_fraction,
        one_hot: a.one_hot.map(OneHot::Auto),
        dir: a.data_dir,
    };
    let run = RunSection {
        out: a.out,
        replications: a.replications,
        seed: a.seed,
        eval_train_limit: a.eval_train_limit,
        methods: if a.method.is_empty() {
            None
        } else {
            Some(a.method)
        },
    };
    let flags = MethodSection {
        k: a.k,
        iterations: a.iters,
        burn_in: a.burn_in,
        seed: a.seed,
        combine_rule: a.combine_rule,
        workers: a.workers,
        trees: a.trees,
        standardize: a.standardize.then_some(true),
        swap: a.swap.then_some(true),
        ..MethodSection::default()
    };
    let spec = config::experiment_spec(&file, &data, &run, &flags).map_err(usage)?;
    let start = Instant::now();
    let dir = run_experiment(&spec).context("run failed")?;
    let labels: Vec<String> = spec.methods.iter().map(method_label).collect();
    println!(
        "{} replication(s) of {} in {:.1}s; results in {}",
        spec.replications,
        labels.join(", "),
        start.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let rep = build_report(&a.run_dir).context("cannot build report")?;
    let out = write_report(&a.run_dir, &rep, &a.ecdf_points).context("cannot write report")?;
    let avg = rep.averaged();
    println!("{}", table_fit(&avg));
    println!("{}", table_coverage(&avg));
    println!("{}", table_moves(&avg));
    println!("report files in {}", out.display());
    Ok(())
}

fn combine(a: CombineArgs) -> Result<(), Failure> {
    let rule: CombineRule = a.combine_rule.parse().map_err(usage)?;
    let label = recombine(&a.run_dir, &a.method, rule).context("re-combination failed")?;
    println!("stored `{}` re-combined as `{label}`", a.method);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Run(a) => run(*a),
        Command::Report(a) => report(a),
        Command::Combine(a) => combine(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
