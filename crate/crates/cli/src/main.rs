//! `emomine`: mine weakly labeled emotional speech from subtitled movies and
//! train, transfer and evaluate a bi-directional GRU classifier.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;
use crate::config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "emomine", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Pipeline config file (TOML).
    #[arg(short, long, default_value = "emomine.toml")]
    config: PathBuf,
    /// Override a config key, e.g. `--set train.learning_rate=0.01`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, Failure> {
        PipelineConfig::load(&self.config, &self.overrides).map_err(Failure::config)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse subtitles, score sentiment, cut labeled segments and write the manifest.
    BuildCorpus {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compute `.feat` spectrogram files for every manifest row.
    Featurize {
        #[command(flatten)]
        config: ConfigArgs,
        /// Only these manifests instead of every manifest named in the config. Repeatable.
        #[arg(long)]
        manifest: Vec<PathBuf>,
    },
    /// Train the positive/negative/neutral model on the mined corpus.
    Pretrain {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Replace the pretrained head and fine-tune on the emotion-labeled target set.
    Finetune {
        #[command(flatten)]
        config: ConfigArgs,
        /// Train from fresh parameters instead of a pretrained model.
        #[arg(long)]
        from_scratch: bool,
    },
    /// Print accuracy and macro F1 of a model on a manifest.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model file; defaults to the fine-tuned model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Labeled manifest; defaults to `eval.manifest`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Two-class task trained without (baseline) and with (augmented) mined segments.
    Binary {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        positive_class: Option<String>,
        #[arg(long)]
        negative_class: Option<String>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Perturb the analytic gradient of this tensor (checks the checker).
        #[arg(long, hide = true)]
        corrupt_gradient: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::BuildCorpus { config } => commands::build_corpus(&config.load()?),
        Command::Featurize { config, manifest } => commands::featurize(&config.load()?, &manifest),
        Command::Pretrain { config } => commands::pretrain(&config.load()?),
        Command::Finetune { config, from_scratch } => commands::finetune(&config.load()?, from_scratch),
        Command::Eval { config, model, manifest } => commands::eval(&config.load()?, model, manifest),
        Command::Binary { config, positive_class, negative_class } => {
            commands::binary(&config.load()?, positive_class, negative_class)
        }
        Command::Gradcheck { seed, corrupt_gradient } => commands::gradcheck(seed, corrupt_gradient.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
