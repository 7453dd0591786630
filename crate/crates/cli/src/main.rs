mod config;
mod failure;
mod stages;

use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Settings;
use failure::{Failure, EXIT_INVARIANT};
use stages::Run;

/// Estimate how many ratings a new user needs before cluster-based
/// collaborative filtering places them where their full history would.
#[derive(Parser)]
#[command(name = "coldstart", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse the dataset, report its size and write canonical.csv.
    Ingest,
    /// Fit k-means and write model.txt.
    Fit,
    /// Evaluate NDCG and MAP over cluster-size coefficients into sweep.csv.
    Sweep,
    /// Replay rating prefixes against model.txt into success and quality CSVs.
    Curves,
    /// Detect the breakpoint and quality intersection into threshold.txt.
    Threshold,
    /// Run ingest, fit, sweep (when coefficients are set), curves, threshold.
    Pipeline,
}

#[derive(Args)]
struct Flags {
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// movielens or jester.
    #[arg(long, global = true)]
    dataset: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Average users per cluster.
    #[arg(long, global = true, value_name = "N")]
    k_coeff: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    t_max: Option<usize>,
    /// Users replayed for the curves.
    #[arg(long, global = true, value_name = "N")]
    sample: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    min_ratings: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks the core count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Comma-separated coefficients for `sweep`.
    #[arg(long, global = true, value_name = "LIST")]
    coeffs: Option<String>,
}

impl Flags {
    fn settings(&self) -> Result<Settings, Failure> {
        let mut s = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
                Settings::parse(&text, &p.display().to_string())?
            }
            None => Settings::default(),
        };
        let mut over = Settings::default();
        let pairs: [(&str, Option<String>); 10] = [
            ("dataset", self.dataset.clone()),
            (
                "input",
                self.input.as_ref().map(|p| p.display().to_string()),
            ),
            ("k_coeff", self.k_coeff.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("t_max", self.t_max.map(|v| v.to_string())),
            ("sample_size", self.sample.map(|v| v.to_string())),
            ("min_ratings", self.min_ratings.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
            ("sweep_coeffs", self.coeffs.clone()),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                over.set(k, v)?;
            }
        }
        s.merge(over);
        Ok(s)
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = cli.flags.settings()?.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    let mut run = Run::new(cfg)?;
    pool.install(|| match cli.command {
        Command::Ingest => run.ingest(),
        Command::Fit => run.fit(),
        Command::Sweep => run.sweep(),
        Command::Curves => run.curves(),
        Command::Threshold => run.threshold(),
        Command::Pipeline => run.pipeline(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(EXIT_INVARIANT),
    }
}
