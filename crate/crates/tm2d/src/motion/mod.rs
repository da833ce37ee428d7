//! Motion, audio-feature, and text data types plus the synthetic corpus
//! generators that stand in for recorded datasets at desk scale.
//!
//! Motions are joint-position sequences in meters at a fixed frame rate.
//! The default skeleton has 8 joints (root, head, hands, knees, feet), so a
//! frame is 24 values. The two corpus families are deliberately different in
//! their raw statistics: "dance" items are beat-locked oscillations paired
//! with audio features, "action" items are parameterized primitives paired
//! with short text descriptions.

mod synth;

pub use synth::{
    synth_action_corpus, synth_audio_features, synth_dance_corpus, ActionCfg, DanceCfg,
    Primitive, AUDIO_DIM,
};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::collections::BTreeMap;

/// Frames per second used throughout unless stated otherwise.
pub const DEFAULT_FPS: f64 = 60.0;
/// Joints in the default skeleton.
pub const JOINTS: usize = 8;
/// Width of one motion frame (x, y, z per joint).
pub const FRAME_DIM: usize = JOINTS * 3;
/// Maximum text length in tokens; shorter texts are padded, longer truncated.
pub const MAX_TEXT_LEN: usize = 84;
/// Reserved padding token id.
pub const PAD_ID: u32 = 0;
/// Reserved unknown-word token id.
pub const UNK_ID: u32 = 1;

/// Joint order within a frame.
pub const JOINT_NAMES: [&str; JOINTS] = [
    "root", "head", "lhand", "rhand", "lknee", "rknee", "lfoot", "rfoot",
];

pub const ROOT: usize = 0;
pub const HEAD: usize = 1;
pub const LHAND: usize = 2;
pub const RHAND: usize = 3;
pub const LKNEE: usize = 4;
pub const RKNEE: usize = 5;
pub const LFOOT: usize = 6;
pub const RFOOT: usize = 7;

/// Rest pose in meters, y up.
pub fn rest_pose() -> [[f64; 3]; JOINTS] {
    [
        [0.00, 0.90, 0.00],  // root
        [0.00, 1.60, 0.00],  // head
        [-0.45, 1.00, 0.05], // lhand
        [0.45, 1.00, 0.05],  // rhand
        [-0.12, 0.50, 0.02], // lknee
        [0.12, 0.50, 0.02],  // rknee
        [-0.14, 0.05, 0.00], // lfoot
        [0.14, 0.05, 0.00],  // rfoot
    ]
}

/// A T×d_m sequence of joint positions at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    frames: Tensor,
    fps: f64,
}

impl MotionSequence {
    pub fn new(frames: Tensor, fps: f64) -> Result<Self> {
        if frames.rank() != 2 || frames.rows() < 1 {
            return Err(Error::dimension(format!(
                "motion frames must be [T>=1, d_m], got {:?}",
                frames.shape()
            )));
        }
        if !frames.cols().is_multiple_of(3) {
            return Err(Error::dimension(format!(
                "frame width {} not divisible by 3",
                frames.cols()
            )));
        }
        let fps_valid = fps > 0.0; // false for NaN too
        if !fps_valid {
            return Err(Error::config(format!("fps must be positive, got {fps}")));
        }
        frames.assert_finite("motion frames")?;
        Ok(MotionSequence { frames, fps })
    }

    pub fn frames(&self) -> &Tensor {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// Number of frames T.
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn joints(&self) -> usize {
        self.frames.cols() / 3
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fps
    }

    /// Position of a joint at a frame.
    pub fn joint(&self, frame: usize, joint: usize) -> [f64; 3] {
        let row = self.frames.row(frame);
        [row[joint * 3], row[joint * 3 + 1], row[joint * 3 + 2]]
    }

    /// Contiguous sub-sequence [start, start+len).
    pub fn slice(&self, start: usize, len: usize) -> Result<MotionSequence> {
        if start + len > self.len() || len == 0 {
            return Err(Error::Range(format!(
                "slice [{start}, {start}+{len}) out of {} frames",
                self.len()
            )));
        }
        let d = self.dim();
        let data = self.frames.data()[start * d..(start + len) * d].to_vec();
        MotionSequence::new(Tensor::new(vec![len, d], data)?, self.fps)
    }

    /// Truncate to the largest multiple of `factor` frames.
    pub fn truncate_to_multiple(&self, factor: usize) -> Result<MotionSequence> {
        let t = (self.len() / factor) * factor;
        if t == 0 {
            return Err(Error::TooShort(format!(
                "motion of {} frames cannot be truncated to a multiple of {factor}",
                self.len()
            )));
        }
        self.slice(0, t)
    }
}

/// Slice a motion into fixed-size windows.
/// Returns floor((T − window)/stride) + 1 windows of exactly `window` frames.
pub fn window_motion(m: &MotionSequence, window: usize, stride: usize) -> Result<Vec<MotionSequence>> {
    if window == 0 || stride == 0 {
        return Err(Error::config("window and stride must be >= 1"));
    }
    let t = m.len();
    if t < window {
        return Err(Error::TooShort(format!(
            "motion has {t} frames, need at least {window} for one window"
        )));
    }
    let count = (t - window) / stride + 1;
    (0..count).map(|i| m.slice(i * stride, window)).collect()
}

/// Per-frame audio features plus the ground-truth beat grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatureSeq {
    pub features: Tensor,
    pub rate: f64,
    pub beat_times: Vec<f64>,
}

impl AudioFeatureSeq {
    /// Number of feature frames.
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.rate
    }
}

/// Closed word→id table with reserved PAD=0 and UNK=1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    /// Build from a word list; duplicates collapse, order is sorted for
    /// determinism. PAD and UNK are always present.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut uniq: Vec<String> = words
            .into_iter()
            .map(str::to_lowercase)
            .filter(|w| !w.is_empty() && w != "<pad>" && w != "<unk>")
            .collect();
        uniq.sort();
        uniq.dedup();
        let mut all = vec!["<pad>".to_string(), "<unk>".to_string()];
        all.extend(uniq);
        let index = all
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocab { words: all, index }
    }

    /// Build from every word appearing in a set of texts.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut words = Vec::new();
        for t in texts {
            for w in split_words(t) {
                words.push(w);
            }
        }
        Vocab::build(words.iter().map(String::as_str))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false // PAD and UNK always present
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

fn split_words(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Token ids padded to [`MAX_TEXT_LEN`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextTokens {
    pub ids: Vec<u32>,
    pub length: usize,
}

/// Lowercase, split on non-alphanumeric characters, map through the vocab
/// (UNK for misses), truncate to 84 tokens, pad with PAD.
pub fn tokenize_text(s: &str, vocab: &Vocab) -> TextTokens {
    let words = split_words(s);
    let length = words.len().min(MAX_TEXT_LEN);
    let mut ids = vec![PAD_ID; MAX_TEXT_LEN];
    for (i, w) in words.iter().take(MAX_TEXT_LEN).enumerate() {
        ids[i] = vocab.id(w);
    }
    TextTokens { ids, length }
}

/// Which corpus family an item belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Dance,
    Action,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Dance => "dance",
            Provenance::Action => "action",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dance" => Ok(Provenance::Dance),
            "action" => Ok(Provenance::Action),
            other => Err(Error::Parse(format!("unknown provenance {other:?}"))),
        }
    }
}

/// One corpus item: a motion plus exactly one pairing (audio or text).
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub motion: MotionSequence,
    pub audio: Option<AudioFeatureSeq>,
    pub text: Option<String>,
    pub label: String,
}

/// A uniform collection of items from one family.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub items: Vec<CorpusItem>,
    pub provenance: Provenance,
}

impl Corpus {
    /// Check the family pairing invariant: dance items carry audio, action
    /// items carry text, never both.
    pub fn validate(&self) -> Result<()> {
        for item in &self.items {
            let ok = match self.provenance {
                Provenance::Dance => item.audio.is_some() && item.text.is_none(),
                Provenance::Action => item.text.is_some() && item.audio.is_none(),
            };
            if !ok {
                return Err(Error::Contract(format!(
                    "item {} violates the {} pairing rule",
                    item.label,
                    self.provenance.as_str()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_motion(t: usize) -> MotionSequence {
        MotionSequence::new(Tensor::zeros(&[t, FRAME_DIM]), DEFAULT_FPS).unwrap()
    }

    #[test]
    fn window_counts() {
        // T=64 -> exactly one window equal to the input
        let m = flat_motion(64);
        let w = window_motion(&m, 64, 16).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0], m);

        // T=128, stride 16 -> (128-64)/16 + 1 = 5
        let m = flat_motion(128);
        assert_eq!(window_motion(&m, 64, 16).unwrap().len(), 5);
    }

    #[test]
    fn window_too_short_names_both_numbers() {
        let m = flat_motion(63);
        let err = window_motion(&m, 64, 16).unwrap_err().to_string();
        assert!(err.contains("63") && err.contains("64"), "{err}");
    }

    #[test]
    fn tokenize_empty_is_all_pad() {
        let vocab = Vocab::build(["a", "person", "jumps"]);
        let t = tokenize_text("", &vocab);
        assert_eq!(t.length, 0);
        assert!(t.ids.iter().all(|&id| id == PAD_ID));
        assert_eq!(t.ids.len(), MAX_TEXT_LEN);
    }

    #[test]
    fn tokenize_known_words() {
        // Vocab is sorted: <pad>=0, <unk>=1, a=2, jumps=3, person=4
        let vocab = Vocab::build(["a", "person", "jumps"]);
        let t = tokenize_text("A person jumps.", &vocab);
        assert_eq!(t.length, 3);
        assert_eq!(&t.ids[0..4], &[2, 4, 3, PAD_ID]);
    }

    #[test]
    fn tokenize_truncates_at_max_len() {
        let vocab = Vocab::build(["word"]);
        let long = vec!["word"; 100].join(" ");
        let t = tokenize_text(&long, &vocab);
        assert_eq!(t.length, MAX_TEXT_LEN);
        assert!(t.ids.iter().all(|&id| id == vocab.id("word")));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let vocab = Vocab::build(["a"]);
        let t = tokenize_text("a zebra", &vocab);
        assert_eq!(&t.ids[0..2], &[vocab.id("a"), UNK_ID]);
    }

    #[test]
    fn motion_invariants() {
        assert!(MotionSequence::new(Tensor::zeros(&[4, 25]), 60.0).is_err()); // not /3
        assert!(MotionSequence::new(Tensor::zeros(&[4, 24]), 0.0).is_err()); // fps
        let nan = Tensor::new(vec![1, 3], vec![0.0, f64::NAN, 0.0]).unwrap();
        assert!(MotionSequence::new(nan, 60.0).is_err());
    }
}
