//! Stage one: the motion tokenizer.
//!
//! A convolutional encoder downsamples a motion window 8× in time, each
//! latent step snaps to its nearest codebook entry, and a convolutional
//! decoder reconstructs the window from the quantized latents. Training uses
//! an L1 reconstruction term, a codebook term pulling entries toward encoder
//! outputs, and a commitment term pulling encoder outputs toward the
//! codebook, with a straight-through estimator carrying reconstruction
//! gradients past the quantizer.

mod train;

pub use train::{recon_l1, train_vqvae, StepRecord, TrainLog, UsageEpoch, VqSession, VqTrainCfg};

use crate::error::{Error, Result};
use crate::motion::{Corpus, MotionSequence, Provenance, FRAME_DIM};
use crate::rng::Pcg32;
use crate::tensor::{Binding, Graph, PadMode, ParamId, ParamStore, Tensor, Var};

/// Motion tokens: indices into the codebook.
pub type TokenSeq = Vec<u32>;

/// Temporal downsample factor (three stride-2 convolutions).
pub const DOWNSAMPLE: usize = 8;

#[derive(Debug, Clone)]
pub struct VqVaeConfig {
    /// Codebook size K.
    pub codebook_size: usize,
    /// Latent width d.
    pub latent_dim: usize,
    /// Motion frame width d_m.
    pub frame_dim: usize,
    /// Commitment loss weight β.
    pub beta: f64,
    /// Learn additive biases in the convolutions.
    pub bias: bool,
}

impl Default for VqVaeConfig {
    fn default() -> Self {
        VqVaeConfig {
            codebook_size: 1024,
            latent_dim: 128,
            frame_dim: FRAME_DIM,
            beta: 0.25,
            bias: true,
        }
    }
}

impl VqVaeConfig {
    /// Small configuration for fast tests.
    pub fn small() -> Self {
        VqVaeConfig {
            codebook_size: 64,
            latent_dim: 64,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta < 0.0 {
            return Err(Error::config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.codebook_size == 0 || self.latent_dim == 0 || self.frame_dim == 0 {
            return Err(Error::config("codebook_size, latent_dim, frame_dim must be >= 1"));
        }
        if self.codebook_size > u32::MAX as usize {
            return Err(Error::config("codebook_size exceeds the token range"));
        }
        Ok(())
    }
}

/// Per-corpus codebook usage counters. They only grow during tokenization.
#[derive(Debug, Clone, Default)]
pub struct UsageCounts {
    pub dance: Vec<u64>,
    pub action: Vec<u64>,
}

impl UsageCounts {
    pub fn new(k: usize) -> Self {
        UsageCounts {
            dance: vec![0; k],
            action: vec![0; k],
        }
    }

    pub fn record(&mut self, provenance: Provenance, tokens: &[u32]) {
        let counts = match provenance {
            Provenance::Dance => &mut self.dance,
            Provenance::Action => &mut self.action,
        };
        for &t in tokens {
            counts[t as usize] += 1;
        }
    }

    pub fn of(&self, provenance: Provenance) -> &[u64] {
        match provenance {
            Provenance::Dance => &self.dance,
            Provenance::Action => &self.action,
        }
    }
}

struct ConvParams {
    weight: ParamId,
    bias: Option<ParamId>,
}

/// The motion VQ-VAE: encoder, codebook, decoder, and usage statistics.
pub struct VqVae {
    cfg: VqVaeConfig,
    store: ParamStore,
    enc: Vec<ConvParams>,
    dec: Vec<ConvParams>,
    codebook: ParamId,
    usage: UsageCounts,
}

impl VqVae {
    pub fn new(cfg: VqVaeConfig, rng: &mut Pcg32) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let d = cfg.latent_dim;
        let dm = cfg.frame_dim;

        let conv = |store: &mut ParamStore, name: &str, w: usize, ci: usize, co: usize, rng: &mut Pcg32| {
            let scale = (1.0 / (w * ci) as f64).sqrt();
            let weight = store.add(
                format!("{name}.weight"),
                Tensor::rand_uniform(&[w, ci, co], -scale, scale, rng),
            );
            let bias = cfg
                .bias
                .then(|| store.add(format!("{name}.bias"), Tensor::zeros(&[co])));
            ConvParams { weight, bias }
        };

        // Encoder: three stride-2 blocks, 8x temporal downsample.
        let enc = vec![
            conv(&mut store, "encoder.conv0", 4, dm, d, rng),
            conv(&mut store, "encoder.conv1", 4, d, d, rng),
            conv(&mut store, "encoder.conv2", 4, d, d, rng),
        ];
        // Decoder: three upsample+conv blocks, then a projection to d_m.
        let dec = vec![
            conv(&mut store, "decoder.conv0", 3, d, d, rng),
            conv(&mut store, "decoder.conv1", 3, d, d, rng),
            conv(&mut store, "decoder.conv2", 3, d, d, rng),
            conv(&mut store, "decoder.out", 3, d, dm, rng),
        ];
        let k = cfg.codebook_size;
        let init = 1.0 / k as f64;
        let codebook = store.add(
            "codebook.entries",
            Tensor::rand_uniform(&[k, d], -init, init, rng),
        );
        let usage = UsageCounts::new(k);
        Ok(VqVae {
            cfg,
            store,
            enc,
            dec,
            codebook,
            usage,
        })
    }

    pub fn cfg(&self) -> &VqVaeConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn usage(&self) -> &UsageCounts {
        &self.usage
    }

    pub fn usage_mut(&mut self) -> &mut UsageCounts {
        &mut self.usage
    }

    pub fn codebook_entries(&self) -> &Tensor {
        self.store.get(self.codebook)
    }

    fn check_encode_input(&self, frames: &Tensor) -> Result<()> {
        if frames.rank() != 2 || frames.cols() != self.cfg.frame_dim {
            return Err(Error::dimension(format!(
                "encoder expects [T, {}], got {:?}",
                self.cfg.frame_dim,
                frames.shape()
            )));
        }
        if !frames.rows().is_multiple_of(DOWNSAMPLE) || frames.rows() < DOWNSAMPLE {
            return Err(Error::dimension(format!(
                "encoder input length {} not divisible by {DOWNSAMPLE}",
                frames.rows()
            )));
        }
        Ok(())
    }

    /// Encoder forward inside a caller-owned graph.
    pub fn encode_graph(&self, g: &mut Graph, bind: &Binding, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.enc.iter().enumerate() {
            let w = bind.var(layer.weight);
            h = g.conv1d(h, w, 2, PadMode::SameStride)?;
            if let Some(b) = layer.bias {
                h = g.add_bias(h, bind.var(b))?;
            }
            if i + 1 < self.enc.len() {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    /// Decoder forward inside a caller-owned graph.
    pub fn decode_graph(&self, g: &mut Graph, bind: &Binding, zq: Var) -> Result<Var> {
        let mut h = zq;
        for layer in &self.dec[..3] {
            h = g.upsample(h, 2)?;
            h = g.conv1d(h, bind.var(layer.weight), 1, PadMode::SameStride)?;
            if let Some(b) = layer.bias {
                h = g.add_bias(h, bind.var(b))?;
            }
            h = g.relu(h);
        }
        let out = &self.dec[3];
        h = g.conv1d(h, bind.var(out.weight), 1, PadMode::SameStride)?;
        if let Some(b) = out.bias {
            h = g.add_bias(h, bind.var(b))?;
        }
        Ok(h)
    }

    /// Deterministic encode of a motion to latents [T/8, d].
    pub fn encode(&self, m: &MotionSequence) -> Result<Tensor> {
        self.check_encode_input(m.frames())?;
        let mut g = Graph::new();
        let bind = Binding::all(&mut g, &self.store);
        let x = g.constant(m.frames().clone());
        let z = self.encode_graph(&mut g, &bind, x)?;
        let out = g.value(z).clone();
        out.assert_finite("encoder output")?;
        Ok(out)
    }

    /// Decode quantized latents [T', d] back to a motion of 8·T' frames.
    pub fn decode_latents(&self, zq: &Tensor, fps: f64) -> Result<MotionSequence> {
        if zq.rank() != 2 || zq.cols() != self.cfg.latent_dim || zq.rows() < 1 {
            return Err(Error::dimension(format!(
                "decoder expects [T' >= 1, {}], got {:?}",
                self.cfg.latent_dim,
                zq.shape()
            )));
        }
        let mut g = Graph::new();
        let bind = Binding::all(&mut g, &self.store);
        let z = g.constant(zq.clone());
        let out = self.decode_graph(&mut g, &bind, z)?;
        MotionSequence::new(g.value(out).clone(), fps)
    }

    /// Decode a token sequence to motion.
    pub fn decode_tokens(&self, tokens: &[u32], fps: f64) -> Result<MotionSequence> {
        let k = self.cfg.codebook_size as u32;
        if let Some(&bad) = tokens.iter().find(|&&t| t >= k) {
            return Err(Error::Index(format!("token {bad} out of range for K = {k}")));
        }
        if tokens.is_empty() {
            return Err(Error::TooShort("cannot decode an empty token sequence".into()));
        }
        let entries = self.codebook_entries();
        let d = self.cfg.latent_dim;
        let mut data = Vec::with_capacity(tokens.len() * d);
        for &t in tokens {
            data.extend_from_slice(entries.row(t as usize));
        }
        let zq = Tensor::new(vec![tokens.len(), d], data)?;
        self.decode_latents(&zq, fps)
    }

    /// Tokenize a motion: truncate to a multiple of 8 frames, encode,
    /// quantize. Does not touch usage counters; see [`VqVae::tokenize_corpus`].
    pub fn tokenize(&self, m: &MotionSequence) -> Result<TokenSeq> {
        let m = m.truncate_to_multiple(DOWNSAMPLE)?;
        let z = self.encode(&m)?;
        let (tokens, _) = quantize(&z, self.codebook_entries())?;
        Ok(tokens)
    }

    /// Tokenize every motion in a corpus, updating the per-corpus usage
    /// counters.
    pub fn tokenize_corpus(&mut self, corpus: &Corpus) -> Result<Vec<TokenSeq>> {
        let mut out = Vec::with_capacity(corpus.len());
        for item in &corpus.items {
            let tokens = self.tokenize(&item.motion)?;
            self.usage.record(corpus.provenance, &tokens);
            out.push(tokens);
        }
        Ok(out)
    }

    /// Reconstruct a motion through encode → quantize → decode.
    pub fn reconstruct(&self, m: &MotionSequence) -> Result<MotionSequence> {
        let truncated = m.truncate_to_multiple(DOWNSAMPLE)?;
        let z = self.encode(&truncated)?;
        let (_, zq) = quantize(&z, self.codebook_entries())?;
        self.decode_latents(&zq, m.fps())
    }
}

/// Nearest-codebook-entry quantization. Returns the token index and the
/// quantized latent row per time step; ties break toward the lowest index.
pub fn quantize(z: &Tensor, entries: &Tensor) -> Result<(TokenSeq, Tensor)> {
    if z.rank() != 2 || entries.rank() != 2 || z.cols() != entries.cols() {
        return Err(Error::dimension(format!(
            "quantize expects z [T', d] and codebook [K, d], got {:?} and {:?}",
            z.shape(),
            entries.shape()
        )));
    }
    let (t, d) = (z.rows(), z.cols());
    let k = entries.rows();
    let mut tokens = Vec::with_capacity(t);
    let mut zq = Vec::with_capacity(t * d);
    for i in 0..t {
        let row = z.row(i);
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for j in 0..k {
            let e = entries.row(j);
            let mut dist = 0.0;
            for (a, b) in row.iter().zip(e) {
                let diff = a - b;
                dist += diff * diff;
            }
            if dist < best_dist {
                best_dist = dist;
                best = j;
            }
        }
        tokens.push(best as u32);
        zq.extend_from_slice(entries.row(best));
    }
    Ok((tokens, Tensor::new(vec![t, d], zq)?))
}

/// The training objective value from plain tensors:
/// `mean L1 reconstruction + ‖sg[z] − z_q‖₂² + β‖z − sg[z_q]‖₂²`.
pub fn vq_loss_value(
    m: &Tensor,
    m_hat: &Tensor,
    z: &Tensor,
    z_q: &Tensor,
    beta: f64,
) -> Result<f64> {
    if beta < 0.0 {
        return Err(Error::config(format!("beta must be >= 0, got {beta}")));
    }
    if m.shape() != m_hat.shape() || z.shape() != z_q.shape() {
        return Err(Error::dimension(format!(
            "vq_loss shapes disagree: m {:?} vs {:?}, z {:?} vs {:?}",
            m.shape(),
            m_hat.shape(),
            z.shape(),
            z_q.shape()
        )));
    }
    let recon = m.mean_abs_diff(m_hat);
    let sq: f64 = z
        .data()
        .iter()
        .zip(z_q.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(recon + sq + beta * sq)
}

/// One training window's graph: loss plus the pieces the trainer logs.
pub(crate) struct WindowForward {
    pub loss: Var,
    pub recon: Var,
    pub tokens: TokenSeq,
}

/// Build the full VQ-VAE training objective for one window inside `g`.
pub(crate) fn window_objective(
    model: &VqVae,
    g: &mut Graph,
    bind: &Binding,
    frames: &Tensor,
) -> Result<WindowForward> {
    model.check_encode_input(frames)?;
    let x = g.constant(frames.clone());
    let z = model.encode_graph(g, bind, x)?;
    let z_value = g.value(z).clone();
    z_value.assert_finite("encoder output")?;
    let latent_elems = z_value.numel() as f64;
    let (tokens, zq_value) = quantize(&z_value, model.codebook_entries())?;

    // Codebook term: gathered entries move toward the (frozen) encoder output.
    let ids: Vec<usize> = tokens.iter().map(|&t| t as usize).collect();
    let gathered = g.embedding(bind.var(model.codebook), &ids)?;
    let z_frozen = g.constant(z_value);
    let cb_diff = g.sub(gathered, z_frozen)?;
    let codebook_term = g.sq_sum(cb_diff);

    // Commitment term: encoder output moves toward the (frozen) entries.
    let zq_frozen = g.constant(zq_value.clone());
    let commit_diff = g.sub(z, zq_frozen)?;
    let commit_term = g.sq_sum(commit_diff);

    // Straight-through: decoder sees z_q, gradients reach the encoder as if
    // the quantizer were the identity.
    let dec_in = g.straight_through(z, zq_value)?;
    let m_hat = model.decode_graph(g, bind, dec_in)?;
    let recon = g.l1_loss(m_hat, x)?;

    // The quadratic terms are averaged over latent elements here so they sit
    // on the same per-element scale as the mean-L1 reconstruction term;
    // otherwise the commitment gradient swamps the reconstruction gradient
    // on the encoder path and the latents collapse.
    let codebook_scaled = g.scale(codebook_term, 1.0 / latent_elems);
    let commit_scaled = g.scale(commit_term, model.cfg.beta / latent_elems);
    let quant_losses = g.add(codebook_scaled, commit_scaled)?;
    let loss = g.add(recon, quant_losses)?;
    Ok(WindowForward { loss, recon, tokens })
}
