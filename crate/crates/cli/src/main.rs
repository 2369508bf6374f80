use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ideaforge_cli::{Overrides, Pipeline, PipelineConfig, Stage, StageOutcome};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Fetch,
    Ingest,
    Compress,
    Extract,
    Embed,
    Cluster,
    Atomize,
    Train,
    Sample,
    Baseline,
    Evaluate,
    Report,
    /// Every stage in order.
    All,
}

/// Find coherent but unlikely research directions in a paper corpus.
#[derive(Debug, Parser)]
#[command(name = "ideaforge", version)]
struct Args {
    /// Stage to run.
    #[arg(value_enum)]
    stage: Command,
    /// Pipeline configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Embed candidates as the mean of their atom centroids.
    #[arg(long)]
    novelty_proxy: bool,
    /// Let one candidate contain the same atom more than once.
    #[arg(long)]
    allow_repeats: bool,
}

fn stage_of(c: Command) -> Option<Stage> {
    Some(match c {
        Command::Fetch => Stage::Fetch,
        Command::Ingest => Stage::Ingest,
        Command::Compress => Stage::Compress,
        Command::Extract => Stage::Extract,
        Command::Embed => Stage::Embed,
        Command::Cluster => Stage::Cluster,
        Command::Atomize => Stage::Atomize,
        Command::Train => Stage::Train,
        Command::Sample => Stage::Sample,
        Command::Baseline => Stage::Baseline,
        Command::Evaluate => Stage::Evaluate,
        Command::Report => Stage::Report,
        Command::All => return None,
    })
}

fn run(args: &Args) -> Result<(), ideaforge_cli::PipelineError> {
    let mut config = PipelineConfig::load(&args.config)?;
    config.apply(&Overrides {
        seed: args.seed,
        novelty_proxy: args.novelty_proxy,
        allow_repeats: args.allow_repeats,
    });
    let mut pipeline = Pipeline::new(config)?;
    let outcomes = match stage_of(args.stage) {
        Some(stage) => vec![(stage, pipeline.run_stage(stage)?)],
        None => pipeline.run_all()?,
    };
    for (stage, outcome) in outcomes {
        match outcome {
            StageOutcome::Ran => eprintln!("{stage}: done"),
            StageOutcome::UpToDate => eprintln!("{stage}: up to date"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
