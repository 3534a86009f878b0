use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use labelcraft_cli::commands::{cmd_ablate, cmd_compare, cmd_evaluate, cmd_generate, cmd_sweep, cmd_train};
use labelcraft_cli::{ExperimentConfig, Method, Overrides, Variant};

/// Label-generation experiments for watch-time recommenders.
#[derive(Debug, Parser)]
#[command(name = "labelcraft", version)]
struct Cli {
    /// TOML experiment configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for data generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root directory for run outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Method for `train`: labelcraft, wt, ef, pc, pcr, d2q or dvr.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Ablation variant such as `w/o DO` or `wo-do`; `all` runs every configured variant in `ablate`.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Cut-off of the top-k metrics and objectives.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured dataset (synthetic or loaded) as CSV.
    Generate,
    /// Train one method and store checkpoints and history.
    Train,
    /// Evaluate a trained run on the test part.
    Evaluate {
        /// Run directory; defaults to the latest training run under `--out`.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Train and evaluate several methods and write a comparison table.
    Compare {
        /// Comma-separated method list.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Reference method of the relative-improvement columns.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Train LabelCraft across a grid of τ values.
    Sweep {
        /// Comma-separated τ values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Train LabelCraft with one or all ablation variants.
    Ablate,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn run(cli: Cli) -> Result<PathBuf, Failure> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(usage)?,
        None => ExperimentConfig::default(),
    };
    let all_variants = cli.variant.as_deref().is_some_and(|v| v.eq_ignore_ascii_case("all"));
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        method: cli
            .method
            .as_deref()
            .map(str::parse::<Method>)
            .transpose()
            .map_err(usage)?,
        variant: match cli.variant.as_deref() {
            Some(_) if all_variants => None,
            Some(v) => Some(v.parse::<Variant>().map_err(usage)?),
            None => None,
        },
        k: cli.k,
    };
    let mut cfg = base.resolve(&overrides);
    match &cli.command {
        Command::Compare { methods, reference } => {
            if let Some(ms) = methods {
                cfg.methods = ms
                    .iter()
                    .map(|m| m.parse())
                    .collect::<anyhow::Result<_>>()
                    .map_err(usage)?;
            }
            if let Some(r) = reference {
                cfg.reference = r.parse().map_err(usage)?;
            } else if !cfg.methods.contains(&cfg.reference) {
                cfg.reference = cfg.methods[0];
            }
            if !cfg.methods.contains(&cfg.reference) {
                return Err(usage(anyhow::anyhow!(
                    "reference method {} is not among the compared methods",
                    cfg.reference
                )));
            }
        }
        Command::Sweep { grid: Some(g) } => cfg.tau_grid = g.clone(),
        _ => {}
    }
    if all_variants && !matches!(cli.command, Command::Ablate) {
        return Err(usage(anyhow::anyhow!("--variant all is only valid for ablate")));
    }
    cfg.validate().map_err(usage)?;

    let result = match &cli.command {
        Command::Generate => cmd_generate(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Evaluate { run } => cmd_evaluate(&cfg, run.as_deref()),
        Command::Compare { .. } => cmd_compare(&cfg),
        Command::Sweep { .. } => cmd_sweep(&cfg),
        Command::Ablate => {
            let variants = if all_variants {
                cfg.variants.clone()
            } else {
                vec![cfg.variant]
            };
            cmd_ablate(&cfg, &variants)
        }
    };
    result.map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
