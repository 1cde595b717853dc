//! `scentprompt`: corpus statistics, embedding, benchmark scoring and prompt
//! mining from one JSON configuration.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 embedding backend failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scentprompt::embedding::{BackendKind, Pooling};
use scentprompt::{Error, ErrorClass, Result};
use serde::de::DeserializeOwned;

use commands::Run;
use config::{RunConfig, EMBED_URL_ENV};
use manifest::Output;

#[derive(Parser)]
#[command(
    name = "scentprompt",
    version,
    about = "Olfactory descriptor embedding and prompt mining"
)]
struct Cli {
    /// JSON run configuration; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for mining and seeded backends.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    embedder: EmbedderArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EmbedderArgs {
    /// vector_table, wordpiece, random, synthetic_test or remote.
    #[arg(long, global = true, value_parser = parse_enum::<BackendKind>)]
    backend: Option<BackendKind>,
    /// Vector table path or remote base URL.
    #[arg(long, global = true)]
    resource: Option<String>,
    #[arg(long, global = true)]
    layer: Option<u32>,
    /// all_tokens or descriptor_only.
    #[arg(long, global = true, value_parser = parse_enum::<Pooling>)]
    pooling: Option<Pooling>,
    /// Context in `[blank]` notation.
    #[arg(long, global = true)]
    prompt: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk the corpus into a lexicon, merge variants and prune rare entries.
    CorpusBuild,
    /// Cumulative frequency coverage of the lexicon.
    CorpusStats,
    /// Jaccard co-occurrence between two descriptor lists.
    Cooccur,
    /// Embed descriptors under the configured prompt.
    Embed,
    /// Score the configured prompt on the rating tasks.
    Evaluate,
    /// Score the prompt at each configured remote layer.
    SweepLayers,
    /// Beam search over descriptor prompts.
    Mine(MineArgs),
    /// Neighbor distances and a 2-D projection around an anchor descriptor.
    Analyze,
    /// Per-descriptor gains between two score maps.
    ReportImprovement,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    generations: Option<u32>,
    /// Continue from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CorpusBuild => "corpus-build",
            Command::CorpusStats => "corpus-stats",
            Command::Cooccur => "cooccur",
            Command::Embed => "embed",
            Command::Evaluate => "evaluate",
            Command::SweepLayers => "sweep-layers",
            Command::Mine(_) => "mine",
            Command::Analyze => "analyze",
            Command::ReportImprovement => "report-improvement",
        }
    }
}

/// Enum flags use the same snake_case spelling as the configuration file.
fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.mining.master_seed = seed;
    }
    let e = &cli.embedder;
    if let Some(backend) = e.backend {
        cfg.embedder.backend = backend;
    }
    if let Some(resource) = &e.resource {
        cfg.embedder.resource = Some(resource.clone());
    }
    if let Some(layer) = e.layer {
        cfg.embedder.layer = layer;
    }
    if let Some(pooling) = e.pooling {
        cfg.embedder.pooling = pooling;
    }
    if let Some(prompt) = &e.prompt {
        cfg.prompt = prompt.clone();
    }
    if let Command::Mine(m) = &cli.command {
        if let Some(k) = m.k {
            cfg.mining.k = k;
        }
        if let Some(g) = m.generations {
            cfg.mining.max_generations = g;
        }
        if let Some(r) = &m.resume {
            cfg.mining.resume = Some(r.clone());
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<PathBuf> {
    let config = resolve(cli)?;
    let embedder = config.effective_embedder(std::env::var(EMBED_URL_ENV).ok());
    let mut out = Output::create(&config.output_dir)?;
    let run = Run { config, embedder };
    match &cli.command {
        Command::CorpusBuild => commands::corpus_build(&run, &mut out)?,
        Command::CorpusStats => commands::corpus_stats(&run, &mut out)?,
        Command::Cooccur => commands::cooccur(&run, &mut out)?,
        Command::Embed => commands::embed(&run, &mut out)?,
        Command::Evaluate => commands::evaluate(&run, &mut out)?,
        Command::SweepLayers => commands::sweep_layers(&run, &mut out)?,
        Command::Mine(_) => commands::mine_prompts(&run, &mut out)?,
        Command::Analyze => commands::analyze(&run, &mut out)?,
        Command::ReportImprovement => commands::report_improvement(&run, &mut out)?,
    }
    // The manifest echoes the embedder as actually used.
    let mut echoed = run.config;
    echoed.embedder = run.embedder;
    out.finish(cli.command.name(), &echoed)
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Backend => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(manifest) => {
            log::info!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::CheckpointWrite { state_json, .. } = &e {
                eprintln!("unsaved search state follows on stdout");
                println!("{state_json}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
