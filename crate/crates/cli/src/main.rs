use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use spectra_mi_cli::{
    cmd_all, cmd_eval, cmd_report, cmd_spectrogram, cmd_synth, cmd_train, init_thread_pool,
    RunConfig,
};

/// EEG motor-imagery classification from channel spectrograms.
#[derive(Parser)]
#[command(name = "spectra-mi", version)]
struct Cli {
    /// key=value configuration file; flags below override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[arg(long, global = true, value_name = "DIR")]
    work_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the effective configuration to FILE before running.
    #[arg(long, global = true, value_name = "FILE")]
    dump_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic EEGR recordings and marker files.
    Synth,
    /// Filter recordings and write SPEC spectrogram files.
    Spectrogram,
    /// Train one model per subject.
    Train,
    /// Score best and final checkpoints.
    Eval,
    /// Print accuracy tables from the eval outputs.
    Report,
    /// Run every stage.
    All,
    /// Print the effective configuration.
    Config,
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(dir) = &cli.work_dir {
        cfg.work_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli)?;
    if let Some(path) = &cli.dump_config {
        std::fs::write(path, cfg.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    let threads = init_thread_pool()?;
    if !matches!(cli.command, Command::Config) {
        eprintln!("spectra-mi: {threads} worker thread(s)");
    }
    match cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Spectrogram => cmd_spectrogram(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Eval => cmd_eval(&cfg),
        Command::Report => cmd_report(&cfg).map(|t| print!("{t}")),
        Command::All => cmd_all(&cfg).map(|t| print!("{t}")),
        Command::Config => {
            print!("{}", cfg.to_text());
            Ok(())
        }
    }
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
