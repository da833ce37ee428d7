//! VQ-VAE training loop: mixed mini-batches of 64-frame windows from both
//! corpora, Adam updates, per-step loss logging, and per-interval codebook
//! usage dumps.

use super::{quantize, window_objective, VqVae, VqVaeConfig};
use crate::error::{Error, Result};
use crate::motion::{window_motion, Corpus, Provenance};
use crate::rng::Pcg32;
use crate::tensor::{Adam, Binding, Graph, Tensor};

#[derive(Debug, Clone)]
pub struct VqTrainCfg {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub window: usize,
    pub window_stride: usize,
    /// Fraction of items (not windows) held out for validation.
    pub val_fraction: f64,
    /// Steps between codebook-usage dumps; 0 means a single dump at the end.
    pub usage_log_every: usize,
}

impl Default for VqTrainCfg {
    fn default() -> Self {
        VqTrainCfg {
            steps: 5000,
            batch_size: 128,
            lr: 1e-4,
            seed: 0,
            window: 64,
            window_stride: 16,
            val_fraction: 0.1,
            usage_log_every: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub recon: f64,
}

/// Codebook usage accumulated over one logging interval.
#[derive(Debug, Clone)]
pub struct UsageEpoch {
    pub step_end: usize,
    pub dance: Vec<u64>,
    pub action: Vec<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub usage_epochs: Vec<UsageEpoch>,
    pub val_l1: Option<f64>,
}

struct WindowPool {
    frames: Vec<Tensor>,
    provenance: Vec<Provenance>,
}

const INIT_STREAM: u64 = 0x7161e0;
const POOL_STREAM: u64 = 0x7161e1;
const TRAIN_STREAM: u64 = 0x7161e2;

/// A training run that can be checkpointed and resumed. The batch-sampling
/// generator lives on its own stream, so rebuilding the window pools on
/// resume replays exactly the same draws as an uninterrupted run.
pub struct VqSession {
    pub model: VqVae,
    pub adam: Adam,
    pub rng: Pcg32,
    pub completed_steps: usize,
}

impl VqSession {
    /// Fresh model and optimizer for a run.
    pub fn new(model_cfg: VqVaeConfig, cfg: &VqTrainCfg) -> Result<Self> {
        let mut init_rng = Pcg32::new(cfg.seed, INIT_STREAM);
        let model = VqVae::new(model_cfg, &mut init_rng)?;
        let adam = Adam::new(model.store(), cfg.lr);
        Ok(VqSession {
            model,
            adam,
            rng: Pcg32::new(cfg.seed, TRAIN_STREAM),
            completed_steps: 0,
        })
    }

    /// Run until `cfg.steps` total steps have completed (a resumed session
    /// continues where it left off).
    pub fn train(&mut self, corpora: &[&Corpus], cfg: &VqTrainCfg) -> Result<TrainLog> {
        if corpora.iter().all(|c| c.is_empty()) {
            return Err(Error::config("cannot train on empty corpora"));
        }
        if cfg.batch_size == 0 || cfg.steps == 0 {
            return Err(Error::config("steps and batch_size must be >= 1"));
        }
        if self.completed_steps > cfg.steps {
            return Err(Error::config(format!(
                "checkpoint already has {} steps, config asks for {}",
                self.completed_steps, cfg.steps
            )));
        }
        let mut pool_rng = Pcg32::new(cfg.seed, POOL_STREAM);
        let (train_pool, val_pool) = build_pools(corpora, cfg, &mut pool_rng)?;
        train_range(self, &train_pool, &val_pool, cfg)
    }
}

/// Train a fresh VQ-VAE over mixed windows from the given corpora.
/// Seed-deterministic: identical inputs produce bit-identical models.
pub fn train_vqvae(
    corpora: &[&Corpus],
    model_cfg: VqVaeConfig,
    train_cfg: &VqTrainCfg,
) -> Result<(VqVae, TrainLog)> {
    let mut session = VqSession::new(model_cfg, train_cfg)?;
    let log = session.train(corpora, train_cfg)?;
    Ok((session.model, log))
}

fn build_pools(
    corpora: &[&Corpus],
    cfg: &VqTrainCfg,
    rng: &mut Pcg32,
) -> Result<(WindowPool, WindowPool)> {
    // Item-level validation split so held-out windows come from unseen items.
    let mut train = WindowPool {
        frames: Vec::new(),
        provenance: Vec::new(),
    };
    let mut val = WindowPool {
        frames: Vec::new(),
        provenance: Vec::new(),
    };
    for corpus in corpora {
        let n = corpus.len();
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let n_val = ((n as f64 * cfg.val_fraction).floor() as usize).min(n.saturating_sub(1));
        let val_set: std::collections::BTreeSet<usize> = order[..n_val].iter().copied().collect();
        for (idx, item) in corpus.items.iter().enumerate() {
            if item.motion.len() < cfg.window {
                continue;
            }
            let windows = window_motion(&item.motion, cfg.window, cfg.window_stride)?;
            let pool = if val_set.contains(&idx) { &mut val } else { &mut train };
            for w in windows {
                pool.frames.push(w.frames().clone());
                pool.provenance.push(corpus.provenance);
            }
        }
    }
    if train.frames.is_empty() {
        return Err(Error::TooShort(format!(
            "no motion in the corpora is at least {} frames long",
            cfg.window
        )));
    }
    Ok((train, val))
}

fn train_range(
    session: &mut VqSession,
    train_pool: &WindowPool,
    val_pool: &WindowPool,
    cfg: &VqTrainCfg,
) -> Result<TrainLog> {
    let VqSession {
        model,
        adam,
        rng,
        completed_steps,
    } = session;
    let model: &mut VqVae = model;
    let mut log = TrainLog::default();

    let k = model.cfg().codebook_size;
    let mut interval_dance = vec![0u64; k];
    let mut interval_action = vec![0u64; k];

    for step in *completed_steps..cfg.steps {
        // One graph per step: every window in the batch shares a single
        // parameter binding and one backward pass.
        let mut g = Graph::new();
        let bind = Binding::all(&mut g, model.store());
        let mut losses = Vec::with_capacity(cfg.batch_size);
        let mut recon_sum = 0.0;
        for _ in 0..cfg.batch_size {
            let pick = rng.below(train_pool.frames.len() as u64) as usize;
            let frames = &train_pool.frames[pick];
            let fwd = window_objective(model, &mut g, &bind, frames)?;
            losses.push(fwd.loss);
            recon_sum += g.value(fwd.recon).item();
            let counts = match train_pool.provenance[pick] {
                Provenance::Dance => &mut interval_dance,
                Provenance::Action => &mut interval_action,
            };
            for &t in &fwd.tokens {
                counts[t as usize] += 1;
            }
        }
        let mut total = losses[0];
        for &l in &losses[1..] {
            total = g.add(total, l)?;
        }
        let scale = 1.0 / cfg.batch_size as f64;
        let mean = g.scale(total, scale);
        g.backward(mean)?;
        let grads = bind.grads(&g);
        adam.step(model.store_mut(), &grads)?;

        let loss = g.value(mean).item();
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss became non-finite at step {step}")));
        }
        log.steps.push(StepRecord {
            step,
            loss,
            recon: recon_sum * scale,
        });

        let interval_done = cfg.usage_log_every > 0 && (step + 1) % cfg.usage_log_every == 0;
        if interval_done || step + 1 == cfg.steps {
            log.usage_epochs.push(UsageEpoch {
                step_end: step + 1,
                dance: std::mem::replace(&mut interval_dance, vec![0; k]),
                action: std::mem::replace(&mut interval_action, vec![0; k]),
            });
        }
    }

    // Fold training-time usage into the model's cumulative counters.
    for epoch in &log.usage_epochs {
        for (acc, &c) in model.usage_mut().dance.iter_mut().zip(&epoch.dance) {
            *acc += c;
        }
        for (acc, &c) in model.usage_mut().action.iter_mut().zip(&epoch.action) {
            *acc += c;
        }
    }

    if !val_pool.frames.is_empty() {
        let mut total = 0.0;
        for frames in &val_pool.frames {
            total += recon_l1(model, frames)?;
        }
        log.val_l1 = Some(total / val_pool.frames.len() as f64);
    }
    *completed_steps = cfg.steps;
    Ok(log)
}

/// Mean per-element L1 reconstruction error of one window.
pub fn recon_l1(model: &VqVae, frames: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let bind = Binding::all(&mut g, model.store());
    let x = g.constant(frames.clone());
    let z = model.encode_graph(&mut g, &bind, x)?;
    let (_, zq) = quantize(g.value(z), model.codebook_entries())?;
    let zq_var = g.constant(zq);
    let m_hat = model.decode_graph(&mut g, &bind, zq_var)?;
    Ok(g.value(m_hat).mean_abs_diff(frames))
}
