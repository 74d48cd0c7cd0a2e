//! `mobprof`: run the trajectory profiling pipeline stage by stage (or end
//! to end) against an artifact directory.
//!
//! Exit codes: 0 on success, 2 when an upstream artifact is missing (the
//! message names the file), 3 for an invalid configuration, 1 otherwise.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mobprof_core::config::Config;
use mobprof_core::pipeline::{run_stage, Stage};
use mobprof_core::Error;

#[derive(Parser)]
#[command(name = "mobprof", version, about = "Mobility lifestyle-profile mining pipeline")]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Artifact directory shared by all stages; falls back to the config's
    /// `out_dir`, then to ./artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Override every stage seed (synth, embedding, clustering, topics).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 1 is the deterministic reference path.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the number of clusters.
    #[arg(long, global = true)]
    k: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a labeled synthetic cohort (trajectories, POIs, labels).
    Synth,
    /// Parse, snap and filter raw trajectories.
    Ingest,
    /// Extract stays, motifs, spectral and semantic features; build views.
    Features,
    /// Run the two-view co-EM k-means over the feature views.
    Cluster,
    /// Train the LDA topic model and the per-cluster topic table.
    Topics,
    /// Emit summary tables (feature means, motifs, topics, ARI).
    Report,
    /// Run every stage in order.
    Pipeline,
}

impl From<Command> for Stage {
    fn from(command: Command) -> Stage {
        match command {
            Command::Synth => Stage::Synth,
            Command::Ingest => Stage::Ingest,
            Command::Features => Stage::Features,
            Command::Cluster => Stage::Cluster,
            Command::Topics => Stage::Topics,
            Command::Report => Stage::Report,
            Command::Pipeline => Stage::Pipeline,
        }
    }
}

fn load_config(cli: &Cli) -> mobprof_core::Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.synth.seed = seed;
        config.embedding.seed = seed;
        config.cluster.seed = seed;
        config.lda.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads.max(1);
    }
    if let Some(k) = cli.k {
        config.cluster.k = k;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("mobprof: {err}");
            return ExitCode::from(3);
        }
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("artifacts"));
    match run_stage(cli.command.into(), &config, &out_dir) {
        Ok(()) => {
            println!("done: artifacts in {}", out_dir.display());
            ExitCode::SUCCESS
        }
        Err(err @ Error::MissingArtifact(_)) => {
            eprintln!("mobprof: {err}; run the earlier stages first");
            ExitCode::from(2)
        }
        Err(err @ Error::InvalidConfig(_)) => {
            eprintln!("mobprof: {err}");
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("mobprof: {err}");
            ExitCode::FAILURE
        }
    }
}
