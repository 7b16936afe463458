use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use factgauge::metastats::CorrelationMode;
use factgauge::pipeline::{run_stage, Overrides, PipelineError, RunConfig, Stage};

#[derive(Parser)]
#[command(
    name = "factgauge",
    version,
    about = "Meta-evaluation of factual-consistency metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "factgauge.toml")]
    config: PathBuf,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Fit sensitivity and correlation over levels 0..L instead of 1..L.
    #[arg(long, global = true)]
    include_level_zero: bool,

    #[arg(long, global = true, value_enum)]
    correlation_mode: Option<Mode>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Corpus statistics of sources and summaries.
    Stats,
    /// Generate the diagnostic dataset.
    Perturb,
    /// Score references, random pairings and diagnostic summaries.
    Score,
    /// Boundedness, sensitivity and correlation verdicts.
    Meta,
    /// Render tables and per-level distributions.
    Report,
    /// Every stage in order.
    All,
}

#[derive(ValueEnum, Clone, Copy)]
enum Mode {
    LevelMean,
    PerSummary,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = match cli.command {
        Command::Stats => Stage::Stats,
        Command::Perturb => Stage::Perturb,
        Command::Score => Stage::Score,
        Command::Meta => Stage::Meta,
        Command::Report => Stage::Report,
        Command::All => Stage::All,
    };
    let result = RunConfig::load(&cli.config).and_then(|mut cfg| {
        cfg.apply(&Overrides {
            seed: cli.seed,
            workers: cli.workers,
            include_level_zero: cli.include_level_zero,
            correlation_mode: cli.correlation_mode.map(|m| match m {
                Mode::LevelMean => CorrelationMode::LevelMean,
                Mode::PerSummary => CorrelationMode::PerSummary,
            }),
        });
        run_stage(stage, &cfg).map(|_| cfg)
    });
    match result {
        Ok(cfg) => {
            eprintln!("{stage}: done, outputs in {}", cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &PipelineError) -> u8 {
    e.exit_code() as u8
}
