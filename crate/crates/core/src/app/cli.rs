//! The `apiary` command line.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{load_config, parse_config, RunConfig};
use super::runner::{evaluate_candidate, resume, run, RunControl, RunReport};
use crate::benchmarks::BenchmarkFunction;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "apiary",
    version,
    about = "Artificial Bee Colony search over benchmarks and neural architectures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `colony.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// No progress output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a search from scratch.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Stop with a checkpoint after this many iterations.
        #[arg(long, value_name = "ITER")]
        stop_after: Option<u64>,
    },
    /// Continue a run from the checkpoint in its output directory.
    Resume {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Optimize a continuous benchmark function. Without `--config` this
    /// uses sphere on [-5, 5]^10 with 10 food sources, 10 onlookers,
    /// limit 25 and 200 iterations.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// sphere, rosenbrock or rastrigin.
        #[arg(long)]
        function: Option<BenchmarkFunction>,
        #[arg(long)]
        dimension: Option<usize>,
    },
    /// Score one candidate with the config's evaluation strategy.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// `|`-joined architecture or comma-separated point.
        #[arg(long)]
        candidate: String,
    },
}

const BENCHMARK_DEFAULTS: &str = r#"
mode = "benchmark"

[colony]
num_food_sources = 10
num_onlookers = 10
abandonment_limit = 25
iterations = 200
"#;

fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    apply(load_config(path)?, common)
}

fn apply(mut config: RunConfig, common: &CommonArgs) -> Result<RunConfig> {
    if let Some(seed) = common.seed {
        config = config.with_seed(seed)?;
    }
    if let Some(out) = &common.out {
        config = config.with_output_dir(out);
    }
    Ok(config)
}

fn report(report: &RunReport) -> Result<()> {
    let s = &report.summary;
    let status = if s.finished { "finished" } else { "stopped" };
    let budget = if s.budget_exhausted {
        " (evaluation budget exhausted)"
    } else {
        ""
    };
    println!(
        "{status} after {} iterations{budget}",
        s.iterations_completed
    );
    println!("best candidate: {}", s.best_candidate);
    println!("best objective: {}", s.best_objective);
    println!(
        "evaluations: {} events, {} invocations, {} cache hits",
        s.evaluation_events, s.evaluator_invocations, s.cache_hits
    );
    if let Some(ft) = &s.full_train {
        println!(
            "full training: objective {}  test accuracy {}",
            ft.objective,
            ft.metrics
                .test_accuracy
                .map_or_else(|| "n/a".to_owned(), |a| a.to_string())
        );
    }
    if let Some(dir) = &report.output_dir {
        println!("outputs: {}", dir.display());
    }
    Ok(())
}

/// Executes a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, stop_after } => {
            let config = resolve(&common)?;
            let control = RunControl {
                stop_after_iteration: stop_after,
                quiet: common.quiet,
                persist: true,
            };
            report(&run(&config, &control)?)
        }
        Command::Resume { common } => {
            let config = resolve(&common)?;
            let control = RunControl {
                quiet: common.quiet,
                ..RunControl::default()
            };
            report(&resume(&config, &control)?)
        }
        Command::Benchmark {
            common,
            function,
            dimension,
        } => {
            let mut config = match &common.config {
                Some(path) => load_config(path)?,
                None => parse_config(BENCHMARK_DEFAULTS)?,
            };
            let section = config.benchmark.as_mut().ok_or_else(|| {
                Error::Config("the benchmark command needs a benchmark-mode config".into())
            })?;
            if let Some(f) = function {
                section.function = f;
            }
            if let Some(d) = dimension {
                section.dimension = d;
            }
            let persist = common.config.is_some() || common.out.is_some();
            let config = apply(config, &common)?;
            let control = RunControl {
                stop_after_iteration: None,
                quiet: common.quiet,
                persist,
            };
            report(&run(&config, &control)?)
        }
        Command::Evaluate { common, candidate } => {
            let config = resolve(&common)?;
            let (canonical, result) = evaluate_candidate(&config, &candidate)?;
            let json = serde_json::json!({
                "candidate": canonical,
                "objective": result.objective,
                "metrics": result.metrics,
            });
            println!("{}", serde_json::to_string_pretty(&json).expect("json"));
            Ok(())
        }
    }
}

/// Entry point used by the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let one_line = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {one_line}", e.category());
            e.exit_code()
        }
    }
}
