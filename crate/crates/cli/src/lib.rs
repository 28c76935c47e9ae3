//! Command-line front end: configuration handling and the pipeline stages.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod config;
mod error;
pub mod stages;

pub use config::{extract_overrides, ConfigError, RunConfig};
pub use error::{CliError, StageError, EXIT_CONFIG, EXIT_DATA, EXIT_TRAINING};

#[derive(Debug, Parser)]
#[command(
    name = "synthwrite",
    version,
    about = "Generate, screen and evaluate synthetic handwriting acceleration data",
    after_help = "Any config key can also be given as a flag: --<section>.<key> <value>"
)]
pub struct Cli {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap; overrides `run.threads`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Copy the corpus at `run.corpus_root` into the output directory.
    Ingest,
    /// Write a synthetic two-class corpus.
    Fixture {
        /// Subjects per class.
        #[arg(long, default_value_t = 40)]
        n: usize,
        /// Class separation; AD noise is scaled by 1 + delta.
        #[arg(long, default_value_t = 2.0)]
        delta: f64,
    },
    /// Train the per-class generators of every cell.
    TrainGen,
    /// Sample unscreened sequences from the trained generators.
    Generate,
    /// Train the screening ensembles and keep the accepted samples.
    Screen,
    /// Train and test the final classifiers.
    TrainClf,
    /// Run the whole pipeline in memory and write the report.
    Evaluate,
    /// Aggregate stored results into the report.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Fixture { .. } => "fixture",
            Command::TrainGen => "train-gen",
            Command::Generate => "generate",
            Command::Screen => "screen",
            Command::TrainClf => "train-clf",
            Command::Evaluate => "evaluate",
            Command::Report => "report",
        }
    }
}

/// Resolves the configuration for a parsed command line.
pub fn resolve_config(cli: &Cli, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut all = overrides.to_vec();
    if let Some(seed) = cli.seed {
        all.push(("run.seed".into(), seed.to_string()));
    }
    if let Some(t) = cli.threads {
        all.push(("run.threads".into(), t.to_string()));
    }
    RunConfig::load(cli.config.as_deref(), &all)
}

/// Runs one command; `log` receives progress lines.
pub fn execute(cli: &Cli, cfg: &RunConfig, log: &mut dyn FnMut(String)) -> Result<(), CliError> {
    if let Some(t) = cfg.threads {
        synthwrite::par::set_threads(t);
    }
    match &cli.command {
        Command::Ingest => {
            let c = stages::ingest(cfg)?;
            log(format!("ingested {} recordings from {} subjects", c.len(), c.n_subjects()));
        }
        Command::Fixture { n, delta } => {
            let c = stages::fixture(cfg, *n, *delta)?;
            log(format!("wrote fixture corpus: {} recordings, digest {}", c.len(), c.digest()));
        }
        Command::TrainGen => stages::train_gen(cfg)?,
        Command::Generate => stages::generate(cfg)?,
        Command::Screen => stages::screen(cfg)?,
        Command::TrainClf => {
            for r in stages::train_clf(cfg)? {
                log(format!("t{} {} rep{} b{}: {:.2}%", r.task, r.mode, r.rep, r.budget, r.accuracy));
            }
        }
        Command::Evaluate => log(stages::evaluate(cfg)?.to_text()?),
        Command::Report => log(stages::report(cfg)?.to_text()?),
    }
    log(format!("{} done; artifacts in {}", cli.command.name(), cfg.output_dir.display()));
    Ok(())
}
