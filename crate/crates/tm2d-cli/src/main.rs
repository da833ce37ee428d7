//! `tm2d` — operator surface for the motion generation pipeline.
//!
//! Exit codes: 0 success, 1 usage error (bad flags or configuration),
//! 2 runtime error. Every command writes its fully resolved configuration
//! beside its outputs.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "tm2d", version, about = "Motion tokenization, music/text conditioned generation, and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Configuration file (key=value lines); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a corpus (motions plus paired audio or text).
    GenData {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Corpus family: dance or action.
        #[arg(long)]
        kind: Option<String>,
        /// Number of items.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the motion tokenizer on both corpora.
    TrainVqvae {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dance: Option<PathBuf>,
        #[arg(long)]
        action: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Resume from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Train the cross-modal transformer on tokenized corpora.
    TrainXmodal {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dance: Option<PathBuf>,
        #[arg(long)]
        action: Option<PathBuf>,
        /// Tokenizer checkpoint.
        #[arg(long = "ckpt-vq")]
        ckpt_vq: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Generate motion from audio features, optionally with a text
    /// instruction over an effect range.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "ckpt-vq")]
        ckpt_vq: Option<PathBuf>,
        #[arg(long = "ckpt-xm")]
        ckpt_xm: Option<PathBuf>,
        /// Audio feature file (TAUD).
        #[arg(long)]
        audio: Option<PathBuf>,
        /// Text instruction; omit for music-only generation.
        #[arg(long)]
        text: Option<String>,
        /// Effect range start (seconds).
        #[arg(long = "text-start")]
        text_start: Option<f64>,
        /// Effect range duration (seconds).
        #[arg(long = "text-duration")]
        text_duration: Option<f64>,
        #[arg(long = "top-k")]
        top_k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output prefix; writes `<out>.tmot`, `<out>.ttok`, `<out>.taud`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the metric suite over generated motions.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory of generated motions (*.tmot, optional sibling *.taud).
        #[arg(long)]
        generated: Option<PathBuf>,
        /// Reference corpus directory.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Reference corpus for the motion predictor (defaults to --reference).
        #[arg(long = "mpd-ref")]
        mpd_ref: Option<PathBuf>,
        /// Output prefix; writes `<out>.report.txt` and `<out>.report.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tokenize two corpora with one tokenizer and report codebook sharing.
    CodebookStats {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Tokenizer checkpoint.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long = "corpus-a")]
        corpus_a: Option<PathBuf>,
        #[arg(long = "corpus-b")]
        corpus_b: Option<PathBuf>,
        /// Output prefix; writes `<out>.csv` and `<out>.pca.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success.
            if e.use_stderr() {
                eprintln!("error: {}", single_line(&e.to_string()));
                return ExitCode::from(1);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn single_line(s: &str) -> String {
    s.lines().next().unwrap_or("invalid usage").to_string()
}

/// Usage problems exit 1, runtime failures exit 2.
fn exit_code(e: &tm2d::Error) -> u8 {
    match e {
        tm2d::Error::Config(_) => 1,
        _ => 2,
    }
}
