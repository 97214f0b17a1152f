use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use collab_cli::{Context, OutputLock, PipelineConfig, Scope};
use collab_core::models::ModelKind;

/// Collaboration-network survival analysis on EHR access logs.
#[derive(Debug, Parser)]
#[command(name = "collab", version)]
struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sets the synth, eval and explain seeds, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort into the dataset directory.
    Synth,
    /// Build per-patient collaboration graphs and their simplified variants.
    Build,
    /// Train one model on one cancer type (or all) and save a checkpoint.
    Train {
        /// collab-only, comorbidity-only, combined, attr-only, topo-only-hcp or topo-only-note
        #[arg(long)]
        model: ModelKind,
        /// breast, lung, colorectal or all
        #[arg(long, default_value = "all")]
        cancer: Scope,
    },
    /// Compare the configured models per cancer type.
    Compare,
    /// Rank attributes by mean |SHAP| under an attr-only checkpoint.
    Explain {
        /// Defaults to `<out>/checkpoints/attr-only-all.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Correlate confounders with survival.
    Correlate,
    /// Write the consolidated summary and charts.
    Report,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    config.validate()?;
    let jobs = cli.jobs.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if jobs == 0 {
        anyhow::bail!(collab_core::Error::config("--jobs", "must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()?;

    let ctx = Context { config, jobs };
    let _lock = OutputLock::acquire(ctx.out())?;
    let written = match cli.command {
        Command::Synth => ctx.synth()?,
        Command::Build => ctx.build()?,
        Command::Train { model, cancer } => ctx.train(model, cancer)?,
        Command::Compare => ctx.compare()?,
        Command::Explain { checkpoint } => ctx.explain(checkpoint.as_deref())?,
        Command::Correlate => ctx.correlate()?,
        Command::Report => ctx.report()?,
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
