//! `supsig`: supplement safety-signal extraction pipeline.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 training
//! failure (divergence), 4 model-artifact format mismatch, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use supsig::error::Error;
use supsig::evaluation::TableFormat;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "supsig",
    version,
    about = "Dietary-supplement adverse event and indication extraction: BIO tagging, relation classification, and frequency-based signal discovery."
)]
struct Cli {
    /// Deterministic single-threaded numeric order (the only implemented
    /// mode; the flag is accepted for forward compatibility).
    #[arg(long, global = true, default_value_t = true)]
    deterministic: bool,

    /// Experiment config file (TOML); defaults to $SUPSIG_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus bundle (BIO, relations, lexicons,
    /// sentences, gold signals, knowledge base).
    GenSynthetic {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a tagger variant, score it, and write artifacts + report.
    TrainNer {
        #[arg(long, value_parser = ["word_only", "char_lstm", "char_cnn", "baseline_crf"])]
        variant: Option<String>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// BIO training corpus (overrides config [data].ner_corpus).
        #[arg(long)]
        train_file: Option<PathBuf>,
    },
    /// Train a relation classifier, score it, and write artifacts + report.
    TrainRe {
        #[arg(long, value_parser = ["cnn", "att_blstm", "rf"])]
        variant: Option<String>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Relation training corpus (overrides config [data].re_corpus).
        #[arg(long)]
        train_file: Option<PathBuf>,
    },
    /// Score a model (or a prediction file) against a gold test file.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Predictions in the same format as the test file, instead of a
        /// model.
        #[arg(long)]
        pred_file: Option<PathBuf>,
        #[arg(long)]
        test_file: PathBuf,
        #[arg(long, default_value = "tsv", value_parser = ["tsv", "markdown"])]
        format: String,
    },
    /// Run tagging + pairing + classification over raw sentences and write
    /// the thresholded, KB-flagged signal report.
    Discover {
        #[arg(long)]
        ner_model: PathBuf,
        #[arg(long)]
        re_model: PathBuf,
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        event_synonyms: Option<PathBuf>,
        /// Keep pairs with more source sentences than this.
        #[arg(long, default_value_t = 10)]
        threshold: usize,
        /// Example sentences attached per reported pair.
        #[arg(long, default_value_t = 10)]
        examples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> supsig::Result<()> {
    let config = ExperimentConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::GenSynthetic { seed, out } => commands::gen_synthetic(&config, *seed, out),
        Command::TrainNer {
            variant,
            runs,
            seed,
            out,
            train_file,
        } => commands::train_ner(
            &config,
            &commands::TrainNerArgs {
                variant: variant.as_deref(),
                runs: *runs,
                seed: *seed,
                out,
                train_file: train_file.as_deref(),
            },
        ),
        Command::TrainRe {
            variant,
            runs,
            seed,
            out,
            train_file,
        } => commands::train_re(
            &config,
            &commands::TrainReArgs {
                variant: variant.as_deref(),
                runs: *runs,
                seed: *seed,
                out,
                train_file: train_file.as_deref(),
            },
        ),
        Command::Eval {
            model,
            pred_file,
            test_file,
            format,
        } => {
            let format = match format.as_str() {
                "markdown" => TableFormat::Markdown,
                _ => TableFormat::Tsv,
            };
            commands::eval(model.as_deref(), pred_file.as_deref(), test_file, format)
        }
        Command::Discover {
            ner_model,
            re_model,
            sentences,
            kb,
            lexicon,
            event_synonyms,
            threshold,
            examples,
            seed,
            out,
        } => commands::discover(
            &config,
            &commands::DiscoverArgs {
                ner_model,
                re_model,
                sentences,
                kb: kb.as_deref(),
                lexicon: lexicon.as_deref(),
                event_synonyms: event_synonyms.as_deref(),
                threshold: *threshold,
                examples: *examples,
                seed: *seed,
                out,
            },
        ),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Io(_) => 2,
        Error::Diverged { .. } => 3,
        Error::Artifact(_) | Error::ArtifactVersion { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
