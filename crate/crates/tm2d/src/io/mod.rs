//! On-disk formats: motion/audio/token files, corpus manifests, checkpoints,
//! run configuration, and metric reports.

mod checkpoint;
mod config;
mod motion_files;
mod report;

pub use checkpoint::{
    load_checkpoint_kind, load_vqvae, load_xmodal, save_vqvae, save_xmodal, TrainerState,
    CKPT_MAGIC,
};
pub use config::RunConfig;
pub use motion_files::{
    load_corpus, read_audio, read_motion, read_tokens, save_corpus, write_audio, write_motion,
    write_tokens,
};
pub use report::MetricReport;

/// Shortest-roundtrip decimal formatting for f64 values in text files.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
