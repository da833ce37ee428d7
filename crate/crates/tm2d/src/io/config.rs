//! Flat key=value run configuration.
//!
//! One document covers every hyperparameter of every stage. Unknown keys are
//! rejected, and each command writes its fully resolved configuration beside
//! its outputs so any artifact can be reproduced from its directory alone.

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::fusion::FusionLocus;
use crate::metrics;
use crate::motion::{DEFAULT_FPS, JOINTS, MAX_TEXT_LEN};
use crate::vqvae::{VqTrainCfg, VqVaeConfig, DOWNSAMPLE};
use crate::xmodal::{XModalConfig, XmTrainCfg};
use std::fmt::Write as _;
use std::path::Path;

macro_rules! run_config {
    ($(($field:ident, $key:literal, $ty:ty, $default:expr, $doc:literal)),* $(,)?) => {
        /// Every tunable of the pipeline, flat.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $(#[doc = $doc] pub $field: $ty),*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $($field: $default),* }
            }
        }

        impl RunConfig {
            /// Apply one key=value assignment. Unknown keys are rejected.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => {
                        self.$field = parse_value::<$ty>($key, value)?;
                        Ok(())
                    })*
                    _ => Err(Error::config(format!("unknown config key {key:?}"))),
                }
            }

            /// Serialize every key, sorted, one per line.
            pub fn to_text(&self) -> String {
                let mut pairs: Vec<(&str, String)> = vec![
                    $(($key, ValueText::text(&self.$field))),*
                ];
                pairs.sort_by(|a, b| a.0.cmp(b.0));
                let mut out = String::new();
                for (k, v) in pairs {
                    let _ = writeln!(out, "{k}={v}");
                }
                out
            }
        }
    };
}

fn parse_value<T: FromConfig>(key: &str, value: &str) -> Result<T> {
    T::from_config(value)
        .ok_or_else(|| Error::config(format!("bad value {value:?} for config key {key}")))
}

trait FromConfig: Sized {
    fn from_config(s: &str) -> Option<Self>;
}

trait ValueText {
    fn text(&self) -> String;
}

impl FromConfig for f64 {
    fn from_config(s: &str) -> Option<Self> {
        s.parse().ok().filter(|v: &f64| v.is_finite())
    }
}
impl FromConfig for usize {
    fn from_config(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}
impl FromConfig for u64 {
    fn from_config(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}
impl FromConfig for bool {
    fn from_config(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}
impl FromConfig for String {
    fn from_config(s: &str) -> Option<Self> {
        Some(s.to_string())
    }
}

impl ValueText for f64 {
    fn text(&self) -> String {
        fmt_f64(*self)
    }
}
impl ValueText for usize {
    fn text(&self) -> String {
        self.to_string()
    }
}
impl ValueText for u64 {
    fn text(&self) -> String {
        self.to_string()
    }
}
impl ValueText for bool {
    fn text(&self) -> String {
        self.to_string()
    }
}
impl ValueText for String {
    fn text(&self) -> String {
        self.clone()
    }
}

run_config! {
    // Run identity and paths.
    (cmd, "cmd", String, String::new(), "Command that produced this config echo."),
    (seed, "seed", u64, 0, "Master seed; all randomness derives from it."),
    (out, "out", String, String::new(), "Output directory or file prefix."),
    (dance_manifest, "dance_manifest", String, String::new(), "Dance corpus manifest path."),
    (action_manifest, "action_manifest", String, String::new(), "Action corpus manifest path."),
    (resume_from, "resume_from", String, String::new(), "Checkpoint to resume training from (empty = fresh)."),
    (ckpt_vq, "ckpt_vq", String, String::new(), "Tokenizer checkpoint path."),
    (ckpt_xm, "ckpt_xm", String, String::new(), "Transformer checkpoint path."),
    (audio, "audio", String, String::new(), "Audio feature file for generation."),
    (text, "text", String, String::new(), "Text instruction (empty = music only)."),
    (text_start, "text_start", f64, 0.0, "Effect range start in seconds."),
    (text_duration, "text_duration", f64, 0.0, "Effect range duration in seconds."),
    (generated, "generated", String, String::new(), "Directory of generated motions to evaluate."),
    (reference, "reference", String, String::new(), "Reference corpus directory for evaluation."),
    (mpd_ref, "mpd_ref", String, String::new(), "Reference corpus for the motion predictor (empty = use reference)."),
    (corpus_a, "corpus_a", String, String::new(), "First corpus for codebook statistics."),
    (corpus_b, "corpus_b", String, String::new(), "Second corpus for codebook statistics."),
    // Data synthesis.
    (kind, "kind", String, "dance".to_string(), "Corpus family to synthesize: dance or action."),
    (n, "n", usize, 10, "Number of items to synthesize."),
    (fps, "fps", f64, DEFAULT_FPS, "Motion frame rate."),
    (joints, "joints", usize, JOINTS, "Joints per skeleton (fixed by the generators)."),
    (window, "window", usize, 64, "Training window length in frames."),
    (window_stride, "window_stride", usize, 16, "Sliding-window stride in frames."),
    (downsample, "downsample", usize, DOWNSAMPLE, "Temporal downsample factor of the tokenizer (fixed)."),
    (audio_dim, "audio_dim", usize, crate::motion::AUDIO_DIM, "Audio feature width."),
    (max_text_len, "max_text_len", usize, MAX_TEXT_LEN, "Maximum text length in tokens (fixed)."),
    // Tokenizer.
    (vq_codebook_size, "vq_codebook_size", usize, 1024, "Codebook size K."),
    (vq_latent_dim, "vq_latent_dim", usize, 128, "Latent width d."),
    (vq_beta, "vq_beta", f64, 0.25, "Commitment loss weight."),
    (vq_bias, "vq_bias", bool, true, "Learn convolution biases."),
    (vq_steps, "vq_steps", usize, 5000, "Tokenizer training steps."),
    (vq_batch, "vq_batch", usize, 128, "Tokenizer batch size (windows)."),
    (vq_lr, "vq_lr", f64, 1e-4, "Tokenizer learning rate."),
    (vq_val_fraction, "vq_val_fraction", f64, 0.1, "Fraction of items held out for validation."),
    (vq_usage_log_every, "vq_usage_log_every", usize, 0, "Steps between usage dumps (0 = once at the end)."),
    // Transformer.
    (xm_hidden, "xm_hidden", usize, 512, "Transformer hidden width."),
    (xm_layers, "xm_layers", usize, 6, "Transformer blocks per stack."),
    (xm_heads, "xm_heads", usize, 8, "Attention heads."),
    (xm_ffn_mult, "xm_ffn_mult", usize, 4, "Feed-forward expansion factor."),
    (xm_steps, "xm_steps", usize, 2000, "Transformer training steps (branches alternate)."),
    (xm_batch, "xm_batch", usize, 64, "Transformer batch size (sequences)."),
    (xm_lr, "xm_lr", f64, 1e-4, "Transformer learning rate."),
    (xm_max_seq_len, "xm_max_seq_len", usize, 512, "Positional table length."),
    // Generation.
    (top_k, "top_k", usize, 10, "Top-k sampling width."),
    (fusion_peak, "fusion_peak", f64, 0.8, "Peak text weight inside the effect range."),
    (fusion_ramp, "fusion_ramp", f64, 0.2, "Cosine ramp fraction at each end of the range."),
    (fusion_locus, "fusion_locus", String, "feature".to_string(), "Blend decoder features or logits."),
    // Metrics.
    (pff_threshold, "pff_threshold", f64, metrics::PFF_THRESHOLD, "Freeze speed threshold (m/s)."),
    (pff_min_duration, "pff_min_duration", f64, metrics::PFF_MIN_DURATION, "Minimum freeze duration (s)."),
    (aucf_max_threshold, "aucf_max_threshold", f64, metrics::AUCF_MAX_THRESHOLD, "Upper end of the AUC_f sweep (m/s)."),
    (beat_sigma, "beat_sigma", f64, metrics::BEAT_SIGMA, "Beat alignment kernel width."),
    (diversity_pairs, "diversity_pairs", usize, 10000, "Sampled pairs for diversity (0 = all pairs)."),
    (mpd_past_frames, "mpd_past_frames", usize, 25, "Frames the motion predictor sees."),
    (mpd_future_frames, "mpd_future_frames", usize, 30, "Frames the motion predictor predicts."),
    (mpd_k, "mpd_k", usize, 10, "Predictor hypotheses."),
}

impl RunConfig {
    /// Parse a config document: key=value lines, `#` comments, blank lines.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Apply assignments from a document on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.downsample != DOWNSAMPLE {
            return Err(Error::config(format!(
                "downsample is fixed at {DOWNSAMPLE} by the tokenizer architecture"
            )));
        }
        if self.max_text_len != MAX_TEXT_LEN {
            return Err(Error::config(format!(
                "max_text_len is fixed at {MAX_TEXT_LEN}"
            )));
        }
        if self.kind != "dance" && self.kind != "action" {
            return Err(Error::config(format!(
                "kind must be dance or action, got {:?}",
                self.kind
            )));
        }
        FusionLocus::parse(&self.fusion_locus)?;
        let fps_valid = self.fps > 0.0; // false for NaN too
        if !fps_valid {
            return Err(Error::config("fps must be positive"));
        }
        Ok(())
    }

    pub fn vqvae_config(&self) -> VqVaeConfig {
        VqVaeConfig {
            codebook_size: self.vq_codebook_size,
            latent_dim: self.vq_latent_dim,
            frame_dim: self.joints * 3,
            beta: self.vq_beta,
            bias: self.vq_bias,
        }
    }

    pub fn vq_train_config(&self) -> VqTrainCfg {
        VqTrainCfg {
            steps: self.vq_steps,
            batch_size: self.vq_batch,
            lr: self.vq_lr,
            seed: self.seed,
            window: self.window,
            window_stride: self.window_stride,
            val_fraction: self.vq_val_fraction,
            usage_log_every: self.vq_usage_log_every,
        }
    }

    pub fn xmodal_config(&self, vocab_size: usize) -> XModalConfig {
        XModalConfig {
            codebook_size: self.vq_codebook_size,
            hidden: self.xm_hidden,
            layers: self.xm_layers,
            heads: self.xm_heads,
            ffn_mult: self.xm_ffn_mult,
            audio_dim: self.audio_dim,
            vocab_size,
            max_seq_len: self.xm_max_seq_len,
        }
    }

    pub fn xm_train_config(&self) -> XmTrainCfg {
        XmTrainCfg {
            steps: self.xm_steps,
            batch_size: self.xm_batch,
            lr: self.xm_lr,
            seed: self.seed,
            music_weight: 1.0,
            text_weight: 1.0,
        }
    }
}
