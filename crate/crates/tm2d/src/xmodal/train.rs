//! Cross-modal transformer training: strictly alternating music and text
//! batches, teacher forcing, per-branch loss logs.

use super::{XModal, XModalConfig};
use crate::error::{Error, Result};
use crate::motion::{tokenize_text, Corpus, TextTokens, Vocab};
use crate::rng::Pcg32;
use crate::tensor::{Adam, Binding, Graph, Tensor, Var};
use crate::vqvae::{TokenSeq, VqVae};

/// One music-branch training pair: audio features aligned 1:1 with the
/// target motion tokens.
#[derive(Debug, Clone)]
pub struct MusicPair {
    pub features: Tensor,
    pub tokens: TokenSeq,
}

/// One text-branch training pair.
#[derive(Debug, Clone)]
pub struct TextPair {
    pub text: TextTokens,
    pub tokens: TokenSeq,
}

/// Training data for both branches plus the text vocabulary it was built with.
#[derive(Debug, Clone)]
pub struct TokenizedCorpora {
    pub music: Vec<MusicPair>,
    pub text: Vec<TextPair>,
    pub vocab: Vocab,
}

/// Tokenize both corpora with a trained VQ-VAE and build the training pairs.
/// The vocabulary is derived from the action corpus texts.
pub fn tokenize_for_xmodal(
    vq: &mut VqVae,
    dance: &Corpus,
    action: &Corpus,
) -> Result<TokenizedCorpora> {
    let dance_tokens = vq.tokenize_corpus(dance)?;
    let action_tokens = vq.tokenize_corpus(action)?;

    let mut music = Vec::with_capacity(dance.len());
    for (item, tokens) in dance.items.iter().zip(dance_tokens) {
        let audio = item.audio.as_ref().ok_or_else(|| {
            Error::Contract(format!("dance item {} has no audio", item.label))
        })?;
        // Motion may have been truncated to a token multiple; align the
        // feature rows to the token count.
        let len = tokens.len().min(audio.len());
        if len == 0 {
            continue;
        }
        let d = audio.dim();
        let feats = Tensor::new(
            vec![len, d],
            audio.features.data()[..len * d].to_vec(),
        )?;
        music.push(MusicPair {
            features: feats,
            tokens: tokens[..len].to_vec(),
        });
    }

    let vocab = Vocab::from_texts(
        action
            .items
            .iter()
            .filter_map(|i| i.text.as_deref()),
    );
    let mut text = Vec::with_capacity(action.len());
    for (item, tokens) in action.items.iter().zip(action_tokens) {
        let raw = item.text.as_deref().ok_or_else(|| {
            Error::Contract(format!("action item {} has no text", item.label))
        })?;
        if tokens.is_empty() {
            continue;
        }
        text.push(TextPair {
            text: tokenize_text(raw, &vocab),
            tokens,
        });
    }
    Ok(TokenizedCorpora { music, text, vocab })
}

#[derive(Debug, Clone)]
pub struct XmTrainCfg {
    /// Total optimizer steps; branches alternate strictly, so each branch
    /// receives half of them.
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Objective weight of music-branch steps (0 freezes the branch).
    pub music_weight: f64,
    /// Objective weight of text-branch steps (0 freezes the branch).
    pub text_weight: f64,
}

impl Default for XmTrainCfg {
    fn default() -> Self {
        XmTrainCfg {
            steps: 2000,
            batch_size: 64,
            lr: 1e-4,
            seed: 0,
            music_weight: 1.0,
            text_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Music,
    Text,
}

#[derive(Debug, Clone)]
pub struct XmStepRecord {
    pub step: usize,
    pub branch: Branch,
    pub loss: f64,
}

#[derive(Debug, Clone, Default)]
pub struct XmTrainLog {
    pub steps: Vec<XmStepRecord>,
}

impl XmTrainLog {
    pub fn last_loss(&self, branch: Branch) -> Option<f64> {
        self.steps
            .iter()
            .rev()
            .find(|r| r.branch == branch)
            .map(|r| r.loss)
    }
}

const INIT_STREAM: u64 = 0x9a0d0;
const TRAIN_STREAM: u64 = 0x9a0d2;

/// A resumable transformer training run; see the tokenizer counterpart for
/// the stream layout rationale.
pub struct XmSession {
    pub model: XModal,
    pub adam: Adam,
    pub rng: Pcg32,
    pub completed_steps: usize,
}

impl XmSession {
    pub fn new(model_cfg: XModalConfig, cfg: &XmTrainCfg) -> Result<Self> {
        let mut init_rng = Pcg32::new(cfg.seed, INIT_STREAM);
        let model = XModal::new(model_cfg, &mut init_rng)?;
        let adam = Adam::new(model.store(), cfg.lr);
        Ok(XmSession {
            model,
            adam,
            rng: Pcg32::new(cfg.seed, TRAIN_STREAM),
            completed_steps: 0,
        })
    }

    /// Run until `cfg.steps` total steps have completed.
    pub fn train(&mut self, data: &TokenizedCorpora, cfg: &XmTrainCfg) -> Result<XmTrainLog> {
        if data.music.is_empty() || data.text.is_empty() {
            return Err(Error::config(
                "both branches need at least one training pair",
            ));
        }
        if cfg.steps == 0 || cfg.batch_size == 0 {
            return Err(Error::config("steps and batch_size must be >= 1"));
        }
        if self.completed_steps > cfg.steps {
            return Err(Error::config(format!(
                "checkpoint already has {} steps, config asks for {}",
                self.completed_steps, cfg.steps
            )));
        }
        train_range(self, data, cfg)
    }
}

/// Train a fresh cross-modal transformer on tokenized corpora.
/// Seed-deterministic.
pub fn train_xmodal(
    data: &TokenizedCorpora,
    model_cfg: XModalConfig,
    cfg: &XmTrainCfg,
) -> Result<(XModal, XmTrainLog)> {
    let mut session = XmSession::new(model_cfg, cfg)?;
    let log = session.train(data, cfg)?;
    Ok((session.model, log))
}

fn train_range(session: &mut XmSession, data: &TokenizedCorpora, cfg: &XmTrainCfg) -> Result<XmTrainLog> {
    let XmSession {
        model,
        adam,
        rng,
        completed_steps,
    } = session;
    let model: &mut XModal = model;
    let mut log = XmTrainLog::default();

    for step in *completed_steps..cfg.steps {
        let branch = if step % 2 == 0 { Branch::Music } else { Branch::Text };
        let mut g = Graph::new();
        let bind = Binding::all(&mut g, model.store());
        let mut losses: Vec<Var> = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let loss = match branch {
                Branch::Music => {
                    let pair = &data.music[rng.below(data.music.len() as u64) as usize];
                    if pair.features.rows() != pair.tokens.len() {
                        return Err(Error::Contract(format!(
                            "music pair conditioning length {} != target length {}",
                            pair.features.rows(),
                            pair.tokens.len()
                        )));
                    }
                    let cond = model.encode_audio_graph(&mut g, &bind, &pair.features)?;
                    model.branch_loss(&mut g, &bind, cond, None, &pair.tokens)?
                }
                Branch::Text => {
                    let pair = &data.text[rng.below(data.text.len() as u64) as usize];
                    let (cond, vis) = model.encode_text_graph(&mut g, &bind, &pair.text)?;
                    model.branch_loss(&mut g, &bind, cond, Some(&vis), &pair.tokens)?
                }
            };
            losses.push(loss);
        }
        let mut total = losses[0];
        for &l in &losses[1..] {
            total = g.add(total, l)?;
        }
        let mean = g.scale(total, 1.0 / cfg.batch_size as f64);
        let loss_value = g.value(mean).item();
        if !loss_value.is_finite() {
            return Err(Error::Numeric(format!(
                "loss became non-finite at step {step}"
            )));
        }
        // The log records the unweighted loss; the weight only scales (or, at
        // zero, skips) the update.
        let weight = match branch {
            Branch::Music => cfg.music_weight,
            Branch::Text => cfg.text_weight,
        };
        if weight > 0.0 {
            let objective = g.scale(mean, weight);
            g.backward(objective)?;
            let grads = bind.grads(&g);
            adam.step(model.store_mut(), &grads)?;
        }
        log.steps.push(XmStepRecord {
            step,
            branch,
            loss: loss_value,
        });
    }
    *completed_steps = cfg.steps;
    Ok(log)
}

/// Teacher-forced argmax accuracy of one branch over a set of pairs.
pub fn teacher_forced_accuracy(
    model: &XModal,
    music: &[MusicPair],
    text: &[TextPair],
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut check = |logits: &Tensor, target: &TokenSeq| {
        for (row, &want) in (0..logits.rows()).zip(target.iter()) {
            let r = logits.row(row);
            let argmax = r
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if argmax == want as usize {
                correct += 1;
            }
            total += 1;
        }
    };
    for pair in music {
        let mut g = Graph::new();
        let bind = Binding::all(&mut g, model.store());
        let cond = model.encode_audio_graph(&mut g, &bind, &pair.features)?;
        let mut input = vec![model.cfg().bos()];
        input.extend_from_slice(&pair.tokens[..pair.tokens.len() - 1]);
        let logits = model.decoder_forward(&mut g, &bind, &input, cond, None)?;
        check(g.value(logits), &pair.tokens);
    }
    for pair in text {
        let mut g = Graph::new();
        let bind = Binding::all(&mut g, model.store());
        let (cond, vis) = model.encode_text_graph(&mut g, &bind, &pair.text)?;
        let mut input = vec![model.cfg().bos()];
        input.extend_from_slice(&pair.tokens[..pair.tokens.len() - 1]);
        let logits = model.decoder_forward(&mut g, &bind, &input, cond, Some(&vis))?;
        check(g.value(logits), &pair.tokens);
    }
    if total == 0 {
        return Err(Error::TooShort("no positions to score".into()));
    }
    Ok(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::MAX_TEXT_LEN;

    /// Synthetic token pairs exercising both branches without a VQ-VAE.
    pub(crate) fn synthetic_data(
        k: usize,
        vocab: &Vocab,
        pairs_per_branch: usize,
        seq_len: usize,
        audio_dim: usize,
        seed: u64,
    ) -> TokenizedCorpora {
        let mut rng = Pcg32::seeded(seed);
        let mut music = Vec::new();
        let mut text = Vec::new();
        let words: Vec<&str> = vocab
            .words()
            .iter()
            .skip(2)
            .map(String::as_str)
            .collect();
        for _ in 0..pairs_per_branch {
            let tokens: TokenSeq = (0..seq_len).map(|_| rng.below(k as u64) as u32).collect();
            let features = Tensor::rand_uniform(&[seq_len, audio_dim], -1.0, 1.0, &mut rng);
            music.push(MusicPair { features, tokens });

            let tokens: TokenSeq = (0..seq_len).map(|_| rng.below(k as u64) as u32).collect();
            let n_words = 3 + rng.below(4) as usize;
            let sentence: Vec<&str> = (0..n_words).map(|_| *rng.choose(&words)).collect();
            text.push(TextPair {
                text: tokenize_text(&sentence.join(" "), vocab),
                tokens,
            });
        }
        TokenizedCorpora {
            music,
            text,
            vocab: vocab.clone(),
        }
    }

    fn test_vocab() -> Vocab {
        Vocab::build(["a", "person", "jumps", "spins", "walks", "waves", "slowly"])
    }

    #[test]
    fn empty_branch_is_a_config_error() {
        let vocab = test_vocab();
        let mut data = synthetic_data(8, &vocab, 2, 6, 4, 1);
        data.text.clear();
        let cfg = XmTrainCfg {
            steps: 2,
            batch_size: 1,
            ..Default::default()
        };
        let mcfg = XModalConfig {
            codebook_size: 8,
            hidden: 16,
            layers: 1,
            heads: 2,
            audio_dim: 4,
            vocab_size: vocab.len(),
            ..XModalConfig::small()
        };
        assert!(matches!(
            train_xmodal(&data, mcfg, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn same_seed_identical_checkpoints() {
        let vocab = test_vocab();
        let data = synthetic_data(8, &vocab, 2, 5, 4, 2);
        let cfg = XmTrainCfg {
            steps: 6,
            batch_size: 2,
            lr: 1e-3,
            seed: 42,
            ..Default::default()
        };
        let mcfg = XModalConfig {
            codebook_size: 8,
            hidden: 16,
            layers: 1,
            heads: 2,
            audio_dim: 4,
            vocab_size: vocab.len(),
            max_seq_len: MAX_TEXT_LEN.max(16),
            ffn_mult: 2,
        };
        let run = || {
            let (m, log) = train_xmodal(&data, mcfg.clone(), &cfg).unwrap();
            let blob: Vec<f64> = m
                .store()
                .iter()
                .flat_map(|(_, t)| t.data().iter().copied())
                .collect();
            (blob, log.steps.last().unwrap().loss)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn alternating_branches_are_logged() {
        let vocab = test_vocab();
        let data = synthetic_data(8, &vocab, 2, 5, 4, 3);
        let cfg = XmTrainCfg {
            steps: 4,
            batch_size: 1,
            lr: 1e-3,
            seed: 1,
            ..Default::default()
        };
        let mcfg = XModalConfig {
            codebook_size: 8,
            hidden: 16,
            layers: 1,
            heads: 2,
            audio_dim: 4,
            vocab_size: vocab.len(),
            max_seq_len: MAX_TEXT_LEN.max(16),
            ffn_mult: 2,
        };
        let (_, log) = train_xmodal(&data, mcfg, &cfg).unwrap();
        let branches: Vec<Branch> = log.steps.iter().map(|r| r.branch).collect();
        assert_eq!(
            branches,
            vec![Branch::Music, Branch::Text, Branch::Music, Branch::Text]
        );
    }
}
