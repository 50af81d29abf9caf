use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedtriad_core::orchestrator::{attack_report, resolve_seed, run_experiment, sweep, ExperimentConfig, ExperimentOutcome};
use fedtriad_core::Error;

/// Fairness-aware federated learning with composable privacy pipelines.
#[derive(Parser)]
#[command(name = "fedtriad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured seed and write rounds.csv, summary.csv and manifest.json.
    Run {
        config: PathBuf,
        /// Master seed; overrides run.seed and FEDTRIAD_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides report.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per axis value and write a combined sweep.csv.
    Sweep {
        config: PathBuf,
        /// One of q, epsilon, poly_degree, shares.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the final-round attack metrics of a finished run directory.
    AttackReport {
        run_dir: PathBuf,
        /// Also recompute clean-model metrics from the saved final checkpoints.
        #[arg(long)]
        recompute: bool,
    },
    /// Parse and validate a configuration without running it.
    Validate { config: PathBuf },
}

enum Failure {
    Config(String),
    Io(String),
    Diverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Csv(_) | Error::Format { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let cfg = ExperimentConfig::from_file(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(label: &str, outcome: &ExperimentOutcome) {
    let metrics: Vec<String> = outcome
        .summary
        .iter()
        .map(|s| format!("{}={:.6}±{:.6}", s.metric, s.mean, s.std))
        .collect();
    println!(
        "{label}: {} runs, {} diverged; {}",
        outcome.runs.len(),
        outcome.diverged.len(),
        metrics.join(" ")
    );
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = load(&config)?;
            let master = resolve_seed(seed, &cfg)?;
            let dir = out.unwrap_or_else(|| cfg.report.dir.clone());
            let outcome = run_experiment(&cfg, master, Some(&dir))?;
            print_summary(&cfg.pipeline.to_string(), &outcome);
            println!("wrote {}", dir.display());
            if outcome.all_diverged() {
                return Err(Failure::Diverged("every run diverged".into()));
            }
        }
        Command::Sweep { config, axis, values, seed, out } => {
            let cfg = load(&config)?;
            let master = resolve_seed(seed, &cfg)?;
            let dir = out.unwrap_or_else(|| cfg.report.dir.clone());
            let result = sweep(&cfg, &axis, &values, master, Some(&dir))?;
            for (value, outcome) in &result.points {
                print_summary(&format!("{axis}={value}"), outcome);
            }
            println!("wrote {}", dir.join("sweep.csv").display());
            if result.points.iter().all(|(_, o)| o.all_diverged()) {
                return Err(Failure::Diverged("every run diverged".into()));
            }
        }
        Command::AttackReport { run_dir, recompute } => {
            print!("{}", attack_report(&run_dir, recompute)?);
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}: ok (pipeline {}, {} runs)", config.display(), cfg.pipeline, cfg.runs);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Diverged(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
