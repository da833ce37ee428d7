//! Stage three: autoregressive generation with late audio-text fusion.
//!
//! Music-only generation runs the audio branch alone. When a text
//! instruction is present, both branches consume the same token history and
//! their final-layer decoder features are blended by a cosine-ramp weight
//! curve inside the caller-chosen effect range, just before the output
//! projection (a logit-level blend is available behind a config switch).
//! Tokens are drawn with top-k sampling and detokenized by the VQ-VAE
//! decoder.

use crate::error::{Error, Result};
use crate::motion::{AudioFeatureSeq, MotionSequence, TextTokens};
use crate::rng::Pcg32;
use crate::tensor::{Binding, Graph, Tensor};
use crate::vqvae::{TokenSeq, VqVae, DOWNSAMPLE};
use crate::xmodal::XModal;

/// Text-weight envelope over the effect range.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionSchedule {
    /// Seconds into the clip where the text starts to take effect.
    pub effect_start: f64,
    /// Length of the effect range in seconds.
    pub effect_duration: f64,
    /// Plateau value of the text weight.
    pub peak: f64,
    /// Fraction of the range spent ramping at each end.
    pub ramp_fraction: f64,
}

impl FusionSchedule {
    pub fn new(effect_start: f64, effect_duration: f64) -> Self {
        FusionSchedule {
            effect_start,
            effect_duration,
            peak: 0.8,
            ramp_fraction: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak > 0.0 && self.peak <= 1.0) {
            return Err(Error::config(format!(
                "fusion peak must be in (0, 1], got {}",
                self.peak
            )));
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 0.5) {
            return Err(Error::config(format!(
                "ramp fraction must be in (0, 0.5], got {}",
                self.ramp_fraction
            )));
        }
        let duration_valid = self.effect_duration > 0.0; // false for NaN too
        if !duration_valid || self.effect_start < 0.0 {
            return Err(Error::config(
                "effect range needs start >= 0 and duration > 0",
            ));
        }
        Ok(())
    }
}

/// Text and audio weights at time `t` (seconds). Zero text weight outside
/// the effect range; half-cosine ramps over the first and last
/// `ramp_fraction` of the range; plateau at `peak` in between. The two
/// weights always sum to 1.
pub fn fusion_weight(t: f64, s: &FusionSchedule) -> (f64, f64) {
    let u = (t - s.effect_start) / s.effect_duration;
    let w_text = if !(0.0..=1.0).contains(&u) {
        0.0
    } else {
        let r = s.ramp_fraction;
        if u < r {
            s.peak * (1.0 - (std::f64::consts::PI * u / r).cos()) / 2.0
        } else if u <= 1.0 - r {
            s.peak
        } else {
            s.peak * (1.0 - (std::f64::consts::PI * (1.0 - u) / r).cos()) / 2.0
        }
    };
    (w_text, 1.0 - w_text)
}

/// Convex blend of the two branch features. The endpoints are exact: weight
/// 0 returns the audio tensor unchanged and weight 1 returns the text tensor
/// unchanged, bit for bit.
pub fn fuse_features(audio: &Tensor, text: &Tensor, w_text: f64) -> Result<Tensor> {
    if audio.shape() != text.shape() {
        return Err(Error::dimension(format!(
            "fused feature shapes differ: {:?} vs {:?}",
            audio.shape(),
            text.shape()
        )));
    }
    if w_text == 0.0 {
        return Ok(audio.clone());
    }
    if w_text == 1.0 {
        return Ok(text.clone());
    }
    let w_audio = 1.0 - w_text;
    let data = audio
        .data()
        .iter()
        .zip(text.data())
        .map(|(&a, &t)| w_audio * a + w_text * t)
        .collect();
    Tensor::new(audio.shape().to_vec(), data)
}

/// Draw a token from the renormalized softmax over the k highest logits.
/// Ties at the k-th place break toward the lower index; k = 1 is argmax.
/// Consumes exactly one draw from the generator.
pub fn sample_topk(logits: &[f64], k: usize, rng: &mut Pcg32) -> Result<u32> {
    if logits.is_empty() || k == 0 || k > logits.len() {
        return Err(Error::config(format!(
            "top-k needs 1 <= k <= {}, got {k}",
            logits.len()
        )));
    }
    if logits.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN logit in sampler".into()));
    }
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    let candidates = &order[..k];

    let max = logits[candidates[0]];
    let mut weights = Vec::with_capacity(k);
    if max == f64::INFINITY {
        // Saturated logits: probability mass sits entirely on the +inf entries.
        for &i in candidates {
            weights.push(if logits[i] == f64::INFINITY { 1.0 } else { 0.0 });
        }
    } else {
        for &i in candidates {
            weights.push((logits[i] - max).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    let draw = rng.next_f64() * total;
    let mut acc = 0.0;
    for (&i, &w) in candidates.iter().zip(&weights) {
        acc += w;
        if draw < acc {
            return Ok(i as u32);
        }
    }
    Ok(candidates[k - 1] as u32)
}

/// Where the audio-text blend happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionLocus {
    /// Blend final-layer decoder features, then project once.
    #[default]
    Feature,
    /// Project each branch, then blend the logits.
    Logit,
}

impl FusionLocus {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "feature" => Ok(FusionLocus::Feature),
            "logit" => Ok(FusionLocus::Logit),
            other => Err(Error::config(format!(
                "fusion locus must be 'feature' or 'logit', got {other:?}"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FusionLocus::Feature => "feature",
            FusionLocus::Logit => "logit",
        }
    }
}

/// Everything one generation run needs.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub audio: AudioFeatureSeq,
    pub text: Option<(TextTokens, FusionSchedule)>,
    pub top_k: usize,
    pub seed: u64,
    pub locus: FusionLocus,
}

impl GenerationRequest {
    pub fn music_only(audio: AudioFeatureSeq, top_k: usize, seed: u64) -> Self {
        GenerationRequest {
            audio,
            text: None,
            top_k,
            seed,
            locus: FusionLocus::Feature,
        }
    }
}

/// Autoregressive music(/text)-conditioned generation.
///
/// The first token is drawn uniformly from the codebook entries used during
/// tokenizer training; each following token is sampled top-k from the
/// decoder conditioned on the full audio features (and, inside the effect
/// range, the text). The token sequence has one entry per audio feature
/// frame and decodes to 8× as many motion frames.
pub fn generate(
    vq: &VqVae,
    xm: &XModal,
    req: &GenerationRequest,
) -> Result<(TokenSeq, MotionSequence)> {
    let t_tokens = req.audio.len();
    if t_tokens == 0 {
        return Err(Error::TooShort(
            "audio must cover at least one token step".into(),
        ));
    }
    if vq.cfg().codebook_size != xm.cfg().codebook_size {
        return Err(Error::Version(format!(
            "tokenizer K = {} but transformer K = {}",
            vq.cfg().codebook_size,
            xm.cfg().codebook_size
        )));
    }
    if req.top_k == 0 || req.top_k > xm.cfg().codebook_size {
        return Err(Error::config(format!(
            "top_k must be in [1, {}], got {}",
            xm.cfg().codebook_size,
            req.top_k
        )));
    }
    if let Some((_, schedule)) = &req.text {
        schedule.validate()?;
        let end = schedule.effect_start + schedule.effect_duration;
        if end > req.audio.duration() + 1e-9 {
            return Err(Error::Range(format!(
                "effect range ends at {end:.3}s but audio lasts {:.3}s",
                req.audio.duration()
            )));
        }
    }

    let mut rng = Pcg32::new(req.seed, 0x9e4e);

    // Conditioning features are token-independent; compute them once.
    let audio_cond = {
        let mut g = Graph::new();
        let bind = Binding::all(&mut g, xm.store());
        let cond = xm.encode_audio_graph(&mut g, &bind, &req.audio.features)?;
        g.value(cond).clone()
    };
    let text_cond: Option<(Tensor, Vec<bool>)> = match &req.text {
        Some((text, _)) => {
            let mut g = Graph::new();
            let bind = Binding::all(&mut g, xm.store());
            let (cond, vis) = xm.encode_text_graph(&mut g, &bind, text)?;
            Some((g.value(cond).clone(), vis))
        }
        None => None,
    };

    let mut tokens: TokenSeq = Vec::with_capacity(t_tokens);
    tokens.push(random_start_token(vq, &mut rng));

    let rate = req.audio.rate;
    for i in 1..t_tokens {
        let t_sec = i as f64 / rate;
        let w_text = match &req.text {
            Some((_, schedule)) => fusion_weight(t_sec, schedule).0,
            None => 0.0,
        };

        let mut prefix = Vec::with_capacity(tokens.len() + 1);
        prefix.push(xm.cfg().bos());
        prefix.extend_from_slice(&tokens);

        let mut g = Graph::new();
        let bind = Binding::all(&mut g, xm.store());
        let cond_a = g.constant(audio_cond.clone());
        let feats_a = xm.decoder_features_graph(&mut g, &bind, &prefix, cond_a, None)?;

        let logits_row: Vec<f64> = if w_text > 0.0 {
            let (tc, vis) = text_cond.as_ref().expect("text weight implies text");
            let cond_t = g.constant(tc.clone());
            let feats_t = xm.decoder_features_graph(&mut g, &bind, &prefix, cond_t, Some(vis))?;
            match req.locus {
                FusionLocus::Feature => {
                    let fa = last_row(g.value(feats_a));
                    let ft = last_row(g.value(feats_t));
                    let fused = fuse_features(&fa, &ft, w_text)?;
                    let fused_var = g.constant(fused);
                    let logits = xm.project_graph(&mut g, &bind, fused_var)?;
                    g.value(logits).row(0).to_vec()
                }
                FusionLocus::Logit => {
                    let la = xm.project_graph(&mut g, &bind, feats_a)?;
                    let lt = xm.project_graph(&mut g, &bind, feats_t)?;
                    let la_row = last_row(g.value(la));
                    let lt_row = last_row(g.value(lt));
                    fuse_features(&la_row, &lt_row, w_text)?.into_data()
                }
            }
        } else {
            let logits = xm.project_graph(&mut g, &bind, feats_a)?;
            let v = g.value(logits);
            v.row(v.rows() - 1).to_vec()
        };

        tokens.push(sample_topk(&logits_row, req.top_k, &mut rng)?);
    }

    let fps = rate * DOWNSAMPLE as f64;
    let motion = vq.decode_tokens(&tokens, fps)?;
    motion.frames().assert_finite("generated motion")?;
    Ok((tokens, motion))
}

/// Uniform draw over codebook entries seen during tokenizer training; if the
/// usage counters are empty (untrained tokenizer), the whole codebook is the
/// candidate set.
fn random_start_token(vq: &VqVae, rng: &mut Pcg32) -> u32 {
    let usage = vq.usage();
    let used: Vec<u32> = (0..vq.cfg().codebook_size)
        .filter(|&t| usage.dance[t] > 0 || usage.action[t] > 0)
        .map(|t| t as u32)
        .collect();
    if used.is_empty() {
        rng.below(vq.cfg().codebook_size as u64) as u32
    } else {
        used[rng.below(used.len() as u64) as usize]
    }
}

fn last_row(t: &Tensor) -> Tensor {
    let r = t.rows() - 1;
    Tensor::new(vec![1, t.cols()], t.row(r).to_vec()).expect("last row")
}
