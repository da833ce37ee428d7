//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them).
//!
//! Criteria 1-11 live here; the 12th (the end-to-end command-line pipeline)
//! lives in the CLI crate's own acceptance test.

use std::sync::OnceLock;
use std::time::Instant;
use tm2d::fusion::{fusion_weight, generate, FusionLocus, FusionSchedule, GenerationRequest};
use tm2d::metrics::{
    auc_f, beat_align, fid, fid_from_stats, mpd, pff, BeatList, FeatureKind, FeatureVector,
    PredictorOracle, AUCF_MAX_THRESHOLD, PFF_MIN_DURATION, PFF_THRESHOLD,
};
use tm2d::motion::{
    synth_action_corpus, synth_dance_corpus, ActionCfg, Corpus, DanceCfg, MotionSequence,
    Provenance, FRAME_DIM,
};
use tm2d::tensor::{grad_check_multi, Binding, PadMode, Tensor};
use tm2d::vqvae::{quantize, train_vqvae, VqTrainCfg, VqVae, VqVaeConfig};
use tm2d::xmodal::{
    teacher_forced_accuracy, tokenize_for_xmodal, train_xmodal, Branch, TokenizedCorpora,
    XModal, XModalConfig, XmTrainCfg,
};
use tm2d::{Graph, Pcg32};

const GRAD_TOL_PRIMITIVE: f64 = 1e-4;
const GRAD_TOL_MODEL: f64 = 1e-3;

fn pass(criterion: usize, what: &str, detail: String) {
    println!("ACCEPTANCE {criterion:>2} PASS — {what}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_gradient_fidelity() {
    let t0 = Instant::now();
    let mut rng = Pcg32::seeded(2024);
    let mut worst: f64 = 0.0;

    // Every differentiable primitive on representative shapes.
    let a = Tensor::rand_uniform(&[3, 4], -1.0, 1.0, &mut rng);
    let b = Tensor::rand_uniform(&[4, 2], -1.0, 1.0, &mut rng);
    let bt = Tensor::rand_uniform(&[5, 2], -1.0, 1.0, &mut rng);
    let bias = Tensor::rand_uniform(&[2], -0.5, 0.5, &mut rng);
    let err = grad_check_multi(
        |g, v| {
            let c = g.matmul(v[0], v[1])?;
            let c = g.add_bias(c, v[3])?;
            let d = g.matmul_nt(c, v[2])?;
            Ok(g.sq_sum(d))
        },
        &[a, b, bt, bias],
        &[],
    )
    .unwrap();
    worst = worst.max(err);

    let x = Tensor::rand_uniform(&[9, 2], -1.0, 1.0, &mut rng);
    let kernel = Tensor::rand_uniform(&[3, 2, 3], -1.0, 1.0, &mut rng);
    let err = grad_check_multi(
        |g, v| {
            let y = g.conv1d(v[0], v[1], 2, PadMode::SameStride)?;
            let up = g.upsample(y, 2)?;
            let r = g.relu(up);
            Ok(g.mean_all(r))
        },
        &[x, kernel],
        &[],
    )
    .unwrap();
    worst = worst.max(err);

    let logits = Tensor::rand_uniform(&[4, 5], -2.0, 2.0, &mut rng);
    let table = Tensor::rand_uniform(&[6, 5], -1.0, 1.0, &mut rng);
    let gain = Tensor::rand_uniform(&[5], 0.8, 1.2, &mut rng);
    let lbias = Tensor::rand_uniform(&[5], -0.2, 0.2, &mut rng);
    let err = grad_check_multi(
        |g, v| {
            let emb = g.embedding(v[1], &[0, 2, 4, 5])?;
            let sum = g.add(emb, v[0])?;
            let normed = g.layer_norm(sum, v[2], v[3], 1e-5)?;
            let mask: Vec<bool> = (0..16).map(|i| i % 4 <= i / 4).collect();
            let scores = g.matmul_nt(normed, normed)?;
            let w = g.masked_softmax(scores, Some(&mask))?;
            let mixed = g.matmul(w, normed)?;
            g.softmax_cross_entropy(mixed, &[1, 0, 3, 2])
        },
        &[logits, table, gain, lbias],
        &[],
    )
    .unwrap();
    worst = worst.max(err);

    let elems = Tensor::rand_uniform(&[3, 3], 0.1, 1.0, &mut rng);
    let other = Tensor::rand_uniform(&[3, 3], 0.1, 1.0, &mut rng);
    let err = grad_check_multi(
        |g, v| {
            let s = g.sub(v[0], v[1])?;
            let m = g.mul(s, v[1])?;
            let sc = g.scale(m, 1.3);
            let ab = g.abs(sc);
            let left = g.slice_cols(ab, 0, 2)?;
            let right = g.slice_cols(ab, 2, 1)?;
            let cc = g.concat_cols(&[right, left])?;
            Ok(g.sum_all(cc))
        },
        &[elems, other],
        &[],
    )
    .unwrap();
    worst = worst.max(err);
    assert!(
        worst < GRAD_TOL_PRIMITIVE,
        "primitive gradient error {worst}"
    );

    // One full transformer block on a random 4×8 input, gradient w.r.t.
    // the input features.
    let block_cfg = XModalConfig {
        codebook_size: 8,
        hidden: 8,
        layers: 1,
        heads: 2,
        ffn_mult: 2,
        audio_dim: 8,
        vocab_size: 6,
        max_seq_len: 96,
    };
    let block = XModal::new(block_cfg, &mut rng).unwrap();
    let block_in = Tensor::rand_uniform(&[4, 8], -1.0, 1.0, &mut rng);
    let block_err = grad_check_multi(
        |g, vars| {
            let bind = Binding::all(g, block.store());
            let out = block.encode_audio_from(g, &bind, vars[0])?;
            Ok(g.sq_sum(out))
        },
        &[block_in],
        &[],
    )
    .unwrap();
    assert!(block_err < GRAD_TOL_PRIMITIVE, "transformer block gradient {block_err}");
    worst = worst.max(block_err);

    // Audio encoder alone on a 4-frame input, gradient w.r.t. the features.
    let cfg = XModalConfig {
        codebook_size: 8,
        hidden: 16,
        layers: 2,
        heads: 2,
        ffn_mult: 2,
        audio_dim: 4,
        vocab_size: 6,
        max_seq_len: 96,
    };
    let model = XModal::new(cfg.clone(), &mut rng).unwrap();
    let features = Tensor::rand_uniform(&[4, 4], -1.0, 1.0, &mut rng);
    let enc_err = grad_check_multi(
        |g, vars| {
            let bind = Binding::all(g, model.store());
            let cond = model.encode_audio_from(g, &bind, vars[0])?;
            Ok(g.sq_sum(cond))
        },
        std::slice::from_ref(&features),
        &[],
    )
    .unwrap();
    assert!(enc_err < GRAD_TOL_PRIMITIVE, "audio encoder input gradient {enc_err}");

    // Toy full transformer (c = 16, L = 2): gradient of the teacher-forced
    // loss w.r.t. every parameter of every stack.
    let store_tensors: Vec<Tensor> = model.store().iter().map(|(_, t)| t.clone()).collect();
    let target = vec![3u32, 1, 4, 1];
    let model_err = grad_check_multi(
        |g, vars| {
            let bind = Binding::from_vars(vars);
            let cond = model.encode_audio_graph(g, &bind, &features)?;
            model.branch_loss(g, &bind, cond, None, &target)
        },
        &store_tensors,
        &[],
    )
    .unwrap();
    assert!(model_err < GRAD_TOL_MODEL, "full-model gradient error {model_err}");

    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "gradient suite took {elapsed:.1}s");
    pass(
        1,
        "gradient fidelity",
        format!(
            "primitives max rel err {worst:.2e} (< 1e-4), full model {model_err:.2e} (< 1e-3), {elapsed:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. Quantization oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_quantization_oracle() {
    let mut rng = Pcg32::seeded(77);
    let mut checked = 0usize;
    for case in 0..1000 {
        let t = 1 + (rng.below(6) as usize);
        let d = 1 + (rng.below(4) as usize);
        let k = 1 + (rng.below(32) as usize);
        let mut z = Tensor::rand_uniform(&[t, d], -1.0, 1.0, &mut rng);
        let mut entries = Tensor::rand_uniform(&[k, d], -1.0, 1.0, &mut rng);
        if case % 5 == 0 && k > 2 {
            // Exact duplicates exercise the lowest-index tie break: entry 1
            // equals entry k−1, and the query hits them dead on.
            let dup = entries.row(k - 1).to_vec();
            entries.row_mut(1).copy_from_slice(&dup);
            z.row_mut(0).copy_from_slice(&dup);
        }
        let (tokens, zq) = quantize(&z, &entries).unwrap();
        for (i, &token) in tokens.iter().enumerate() {
            let dists: Vec<f64> = (0..k)
                .map(|j| {
                    z.row(i)
                        .iter()
                        .zip(entries.row(j))
                        .map(|(&p, &q)| (p - q) * (p - q))
                        .sum()
                })
                .collect();
            // Independent selection: scan from the back, prefer not-worse
            // earlier entries, which lands on the lowest index among ties.
            let mut best = k - 1;
            for j in (0..k).rev() {
                if dists[j] <= dists[best] {
                    best = j;
                }
            }
            assert_eq!(token as usize, best, "case {case} step {i}");
            assert_eq!(zq.row(i), entries.row(best));
            checked += 1;
        }
    }
    pass(2, "quantization oracle", format!("{checked} steps over 1000 instances match brute force"));
}

// ---------------------------------------------------------------------------
// 3. Straight-through contract
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_straight_through_contract() {
    let mut rng = Pcg32::seeded(5005);
    let model = VqVae::new(VqVaeConfig::small(), &mut rng).unwrap();
    let window = Tensor::rand_uniform(&[64, FRAME_DIM], -0.5, 0.5, &mut rng);

    // Estimator route: reconstruction gradient at the encoder output with
    // the quantizer in place (codebook frozen: constants in this graph).
    let mut g = Graph::new();
    let bind = Binding::all(&mut g, model.store());
    let x = g.constant(window.clone());
    let z = model.encode_graph(&mut g, &bind, x).unwrap();
    let z_value = g.value(z).clone();
    let (_, zq_value) = quantize(&z_value, model.codebook_entries()).unwrap();
    let dec_in = g.straight_through(z, zq_value.clone()).unwrap();
    let m_hat = model.decode_graph(&mut g, &bind, dec_in).unwrap();
    let recon = g.l1_loss(m_hat, x).unwrap();
    g.backward(recon).unwrap();
    let estimator = g.grad(z).unwrap().clone();

    // Surrogate route: substitute z for z_q as the decoder input variable
    // (evaluated at the same quantized point) and differentiate directly.
    let mut g2 = Graph::new();
    let bind2 = Binding::all(&mut g2, model.store());
    let x2 = g2.constant(window);
    let w = g2.input(zq_value, true);
    let m_hat2 = model.decode_graph(&mut g2, &bind2, w).unwrap();
    let recon2 = g2.l1_loss(m_hat2, x2).unwrap();
    g2.backward(recon2).unwrap();
    let surrogate = g2.grad(w).unwrap().clone();

    let max_rel = estimator
        .data()
        .iter()
        .zip(surrogate.data())
        .map(|(&p, &q)| (p - q).abs() / p.abs().max(q.abs()).max(1e-8))
        .fold(0.0, f64::max);
    assert!(max_rel < 1e-6, "estimator vs surrogate rel err {max_rel}");
    pass(3, "straight-through contract", format!("max rel err {max_rel:.2e} (< 1e-6)"));
}

// ---------------------------------------------------------------------------
// 4. VQ-VAE overfit (small and full)
// ---------------------------------------------------------------------------

#[test]
fn criterion_04a_vqvae_two_window_overfit() {
    let dance = synth_dance_corpus(2, 40, &DanceCfg::default()).unwrap();
    let corpus = Corpus {
        items: dance
            .items
            .iter()
            .enumerate()
            .map(|(i, item)| tm2d::motion::CorpusItem {
                motion: item.motion.slice(0, 64).unwrap(),
                audio: item.audio.clone(),
                text: None,
                label: format!("w{i}"),
            })
            .collect(),
        provenance: Provenance::Dance,
    };
    let cfg = VqTrainCfg {
        steps: 500,
        batch_size: 4,
        lr: 1.5e-3,
        seed: 3,
        val_fraction: 0.0,
        ..Default::default()
    };
    let (model, _) = train_vqvae(&[&corpus], VqVaeConfig::small(), &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for item in &corpus.items {
        worst = worst.max(tm2d::vqvae::recon_l1(&model, item.motion.frames()).unwrap());
    }
    assert!(worst < 0.05, "two-window overfit L1 {worst}");
    pass(4, "vq-vae overfit (2 windows, 500 steps)", format!("per-element L1 {worst:.4} (< 0.05)"));
}

#[test]
fn criterion_04b_vqvae_full_corpora() {
    let t0 = Instant::now();
    let dance = synth_dance_corpus(100, 1001, &DanceCfg::default()).unwrap();
    let action = synth_action_corpus(100, 1002, &ActionCfg::default()).unwrap();
    let cfg = VqTrainCfg {
        steps: 5000,
        batch_size: 8,
        lr: 1e-3,
        seed: 7,
        val_fraction: 0.1,
        ..Default::default()
    };
    let mcfg = VqVaeConfig {
        codebook_size: 1024,
        latent_dim: 64,
        ..Default::default()
    };
    let (_, log) = train_vqvae(&[&dance, &action], mcfg, &cfg).unwrap();
    let val = log.val_l1.expect("validation split requested");
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(val < 0.15, "validation L1 {val}");
    assert!(elapsed < 900.0, "full training took {elapsed:.0}s");
    pass(
        4,
        "vq-vae full corpora (100+100, 5k steps)",
        format!("validation L1 {val:.4} (< 0.15) in {elapsed:.0}s (< 900s)"),
    );
}

// ---------------------------------------------------------------------------
// 5. Shared codebook
// ---------------------------------------------------------------------------

fn min_shared_fraction(model: &mut VqVae, a: &Corpus, b: &Corpus) -> f64 {
    let ta = model.tokenize_corpus(a).unwrap();
    let tb = model.tokenize_corpus(b).unwrap();
    let stats = tm2d::analysis::usage_stats(&ta, &tb, model.cfg().codebook_size).unwrap();
    stats.pct_a.min(stats.pct_b)
}

#[test]
fn criterion_05_shared_codebook() {
    let dance = synth_dance_corpus(40, 2001, &DanceCfg::default()).unwrap();
    let action = synth_action_corpus(40, 2002, &ActionCfg::default()).unwrap();
    let mcfg = VqVaeConfig {
        codebook_size: 64,
        latent_dim: 32,
        ..Default::default()
    };
    let cfg = VqTrainCfg {
        steps: 2500,
        batch_size: 8,
        lr: 1.2e-3,
        seed: 11,
        val_fraction: 0.0,
        ..Default::default()
    };
    let (mut mixed, _) = train_vqvae(&[&dance, &action], mcfg.clone(), &cfg).unwrap();
    let mixed_frac = min_shared_fraction(&mut mixed, &dance, &action);

    let (mut dance_only, _) = train_vqvae(&[&dance], mcfg.clone(), &cfg).unwrap();
    let single_d = min_shared_fraction(&mut dance_only, &dance, &action);
    let (mut action_only, _) = train_vqvae(&[&action], mcfg, &cfg).unwrap();
    let single_a = min_shared_fraction(&mut action_only, &dance, &action);
    let single = (single_d + single_a) / 2.0;

    assert!(mixed_frac >= 50.0, "mixed shared fraction {mixed_frac:.1}%");
    assert!(
        mixed_frac > single,
        "mixed {mixed_frac:.1}% not above cross-corpus singles {single:.1}%"
    );
    pass(
        5,
        "shared codebook",
        format!(
            "mixed min fraction {mixed_frac:.1}% (>= 50%), single-corpus cross {single:.1}% (dance-only {single_d:.1}%, action-only {single_a:.1}%)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Causality
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_causality() {
    let mut rng = Pcg32::seeded(606);
    let cfg = XModalConfig {
        codebook_size: 32,
        hidden: 32,
        layers: 2,
        heads: 4,
        ffn_mult: 2,
        audio_dim: 6,
        vocab_size: 8,
        max_seq_len: 64,
    };
    let model = XModal::new(cfg.clone(), &mut rng).unwrap();
    let features = Tensor::rand_uniform(&[12, 6], -1.0, 1.0, &mut rng);
    let bos = model.cfg().bos();

    let forward = |tokens: &[u32]| -> Tensor {
        let mut g = Graph::new();
        let bind = Binding::all(&mut g, model.store());
        let cond = model.encode_audio_graph(&mut g, &bind, &features).unwrap();
        let logits = model
            .decoder_forward(&mut g, &bind, tokens, cond, None)
            .unwrap();
        g.value(logits).clone()
    };

    for trial in 0..100 {
        let len = 2 + (rng.below(10) as usize);
        let mut tokens = vec![bos];
        tokens.extend((0..len).map(|_| rng.below(32) as u32));
        let base = forward(&tokens);

        // Perturb one "future" token and check all earlier logits.
        let pos = 1 + (rng.below(len as u64) as usize);
        let mut perturbed = tokens.clone();
        perturbed[pos] = (perturbed[pos] + 1 + rng.below(31) as u32) % 32;
        let changed = forward(&perturbed);
        for row in 0..pos {
            assert_eq!(
                base.row(row),
                changed.row(row),
                "trial {trial}: logits before position {pos} changed"
            );
        }
    }
    pass(6, "causality", "100 random prefixes, earlier logits bit-identical".into());
}

// ---------------------------------------------------------------------------
// 7. Transformer overfit
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_transformer_overfit() {
    let vocab = tm2d::motion::Vocab::build(["person", "jumps", "spins", "walks", "waves", "a"]);
    let mut rng = Pcg32::seeded(707);
    let k = 48;
    let len = 14;
    let mut music = Vec::new();
    let mut text = Vec::new();
    for _ in 0..4 {
        music.push(tm2d::xmodal::MusicPair {
            features: Tensor::rand_uniform(&[len, 6], -1.0, 1.0, &mut rng),
            tokens: (0..len).map(|_| rng.below(k as u64) as u32).collect(),
        });
        let words: Vec<&str> = (0..5)
            .map(|_| *rng.choose(&["person", "jumps", "spins", "walks", "waves", "a"]))
            .collect();
        text.push(tm2d::xmodal::TextPair {
            text: tm2d::motion::tokenize_text(&words.join(" "), &vocab),
            tokens: (0..len).map(|_| rng.below(k as u64) as u32).collect(),
        });
    }
    let data = TokenizedCorpora {
        music,
        text,
        vocab: vocab.clone(),
    };
    let mcfg = XModalConfig {
        codebook_size: k,
        hidden: 64,
        layers: 2,
        heads: 4,
        ffn_mult: 2,
        audio_dim: 6,
        vocab_size: vocab.len(),
        max_seq_len: 96,
    };
    let cfg = XmTrainCfg {
        steps: 2000,
        batch_size: 4,
        lr: 2e-3,
        seed: 12,
        ..Default::default()
    };
    let (model, log) = train_xmodal(&data, mcfg, &cfg).unwrap();
    let music_loss = log.last_loss(Branch::Music).unwrap();
    let text_loss = log.last_loss(Branch::Text).unwrap();
    let acc = teacher_forced_accuracy(&model, &data.music, &data.text).unwrap();
    assert!(music_loss < 0.1, "music branch loss {music_loss}");
    assert!(text_loss < 0.1, "text branch loss {text_loss}");
    assert_eq!(acc, 1.0, "teacher-forced accuracy {acc}");
    pass(
        7,
        "transformer overfit",
        format!("accuracy 100%, losses music {music_loss:.4} / text {text_loss:.4} (< 0.1)"),
    );
}

// ---------------------------------------------------------------------------
// 8. Fusion curve
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_fusion_curve() {
    let s = FusionSchedule::new(3.0, 5.0);
    assert_eq!(fusion_weight(s.effect_start, &s).0, 0.0);
    assert_eq!(fusion_weight(s.effect_start + s.effect_duration, &s).0, 0.0);

    let mut max_w: f64 = 0.0;
    for i in 0..=1000 {
        let t = 2.0 + 7.0 * i as f64 / 1000.0;
        let (wt, wa) = fusion_weight(t, &s);
        assert!((wt + wa - 1.0).abs() <= 1e-12, "sum violated at t={t}");
        max_w = max_w.max(wt);
    }
    assert_eq!(max_w, 0.8, "peak is {max_w}");

    // Continuity at the four ramp joints.
    let eps = 1e-9;
    for joint in [
        s.effect_start,
        s.effect_start + s.ramp_fraction * s.effect_duration,
        s.effect_start + (1.0 - s.ramp_fraction) * s.effect_duration,
        s.effect_start + s.effect_duration,
    ] {
        let before = fusion_weight(joint - eps, &s).0;
        let at = fusion_weight(joint, &s).0;
        let after = fusion_weight(joint + eps, &s).0;
        assert!(
            (before - at).abs() < 1e-6 && (after - at).abs() < 1e-6,
            "discontinuity at {joint}: {before} {at} {after}"
        );
    }
    pass(8, "fusion curve", "endpoints 0, max 0.8, weights sum to 1 at 1000 points, joints continuous".into());
}

// ---------------------------------------------------------------------------
// Shared trained fixture for criteria 9 and 11
// ---------------------------------------------------------------------------

struct Fixture {
    vq: VqVae,
    xm: XModal,
    dance: Corpus,
    vocab: tm2d::motion::Vocab,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dance = synth_dance_corpus(10, 3001, &DanceCfg::default()).unwrap();
        let action = synth_action_corpus(10, 3002, &ActionCfg::default()).unwrap();
        let vq_cfg = VqTrainCfg {
            steps: 800,
            batch_size: 8,
            lr: 1.2e-3,
            seed: 21,
            val_fraction: 0.0,
            ..Default::default()
        };
        let (mut vq, _) = train_vqvae(
            &[&dance, &action],
            VqVaeConfig {
                codebook_size: 64,
                latent_dim: 32,
                ..Default::default()
            },
            &vq_cfg,
        )
        .unwrap();
        let data = tokenize_for_xmodal(&mut vq, &dance, &action).unwrap();
        let mcfg = XModalConfig {
            codebook_size: 64,
            hidden: 48,
            layers: 2,
            heads: 4,
            ffn_mult: 2,
            audio_dim: 16,
            vocab_size: data.vocab.len(),
            max_seq_len: 160,
        };
        let xm_cfg = XmTrainCfg {
            steps: 2400,
            batch_size: 4,
            lr: 1.5e-3,
            seed: 22,
            ..Default::default()
        };
        let vocab = data.vocab.clone();
        let (xm, _) = train_xmodal(&data, mcfg, &xm_cfg).unwrap();
        Fixture { vq, xm, dance, vocab }
    })
}

// ---------------------------------------------------------------------------
// 9. Fusion determinism and observable text influence
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_fusion_determinism() {
    let fx = fixture();
    let audio = fx.dance.items[0].audio.clone().unwrap();
    let rate = audio.rate;
    let effect_start = 3.0;
    let effect_duration = 4.0;
    assert!(audio.duration() > effect_start + effect_duration);

    let text = tm2d::motion::tokenize_text("a person jumps up and down", &fx.vocab);
    let mut trials_with_difference = 0;
    for seed in 0..20u64 {
        let music_req = GenerationRequest::music_only(audio.clone(), 10, 9000 + seed);
        let (music_tokens, _) = generate(&fx.vq, &fx.xm, &music_req).unwrap();

        let fused_req = GenerationRequest {
            audio: audio.clone(),
            text: Some((text.clone(), FusionSchedule::new(effect_start, effect_duration))),
            top_k: 10,
            seed: 9000 + seed,
            locus: FusionLocus::Feature,
        };
        let (fused_tokens, motion) = generate(&fx.vq, &fx.xm, &fused_req).unwrap();
        assert!(motion.frames().is_finite());

        // Identical strictly before the effect range.
        let boundary = (effect_start * rate).ceil() as usize;
        assert_eq!(
            &music_tokens[..boundary],
            &fused_tokens[..boundary],
            "seed {seed}: tokens before the effect range diverged"
        );
        // Observable influence inside the range.
        let end = ((effect_start + effect_duration) * rate).floor() as usize;
        if music_tokens[boundary..end] != fused_tokens[boundary..end] {
            trials_with_difference += 1;
        }
    }
    assert!(
        trials_with_difference >= 18,
        "text changed tokens in only {trials_with_difference}/20 trials"
    );
    pass(
        9,
        "fusion determinism",
        format!("pre-range tokens identical on 20/20 trials, in-range difference on {trials_with_difference}/20 (>= 18)"),
    );
}

// ---------------------------------------------------------------------------
// 10. Metric oracles
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_metric_oracles() {
    // fid(a, a) = 0 ± 1e-9 on a full-rank cloud.
    let mut rng = Pcg32::seeded(1010);
    let cloud: Vec<FeatureVector> = (0..60)
        .map(|_| FeatureVector {
            values: (0..4).map(|j| rng.normal() * (1.0 + j as f64 * 0.5)).collect(),
            kind: FeatureKind::Kinetic,
        })
        .collect();
    let self_fid = fid(&cloud, &cloud).unwrap();
    assert!(self_fid.abs() < 1e-9, "fid(a,a) = {self_fid}");

    // Closed form: N(0,1) vs N(1,1) has distance 1; empirical at n = 5000.
    let unit = Tensor::from_rows(&[vec![1.0]]);
    let direct = fid_from_stats(&[0.0], &unit, &[1.0], &unit).unwrap();
    assert!((direct - 1.0).abs() < 1e-12);
    let a: Vec<FeatureVector> = (0..5000)
        .map(|_| FeatureVector { values: vec![rng.normal()], kind: FeatureKind::Kinetic })
        .collect();
    let b: Vec<FeatureVector> = (0..5000)
        .map(|_| FeatureVector { values: vec![rng.normal() + 1.0], kind: FeatureKind::Kinetic })
        .collect();
    let empirical = fid(&a, &b).unwrap();
    assert!((empirical - 1.0).abs() < 0.05, "empirical fid {empirical}");

    // Beat alignment: coincident beats score 1; a 3-unit offset at σ = 3
    // scores exp(−1/2).
    let beats = BeatList::new(vec![1.0, 2.0, 3.5]).unwrap();
    assert_eq!(beat_align(&beats, &beats, 3.0), 1.0);
    let single = BeatList::new(vec![10.0]).unwrap();
    let offset = BeatList::new(vec![13.0]).unwrap();
    let score = beat_align(&single, &offset, 3.0);
    assert!((score - 0.6065306597126334).abs() < 1e-6, "offset score {score}");

    // PFF: the 3-seconds-frozen-in-10 construction scores exactly 30.
    let fps = 60.0;
    let mut frames = Vec::new();
    let mut xpos = 0.0;
    for i in 0..600 {
        if !(201..=380).contains(&i) {
            xpos += 1.0 / fps;
        }
        let mut row = vec![0.0; FRAME_DIM];
        for j in 0..FRAME_DIM / 3 {
            row[j * 3] = xpos;
        }
        frames.push(row);
    }
    let frozen_motion = MotionSequence::new(Tensor::from_rows(&frames), fps).unwrap();
    let p = pff(&frozen_motion, PFF_THRESHOLD, PFF_MIN_DURATION).unwrap();
    assert_eq!(p, 30.0, "pff {p}");

    // AUC_f of a fully static motion is ≈ 100.
    let static_motion =
        MotionSequence::new(Tensor::zeros(&[600, FRAME_DIM]), fps).unwrap();
    let auc = auc_f(&static_motion, AUCF_MAX_THRESHOLD).unwrap();
    assert!((auc - 100.0).abs() < 1.0, "auc_f {auc}");

    // MPD is zero when the oracle contains the truth.
    struct Truthful(MotionSequence);
    impl PredictorOracle for Truthful {
        fn predict(&self, _past: &MotionSequence, _len: usize) -> tm2d::Result<Vec<MotionSequence>> {
            Ok(vec![self.0.clone()])
        }
    }
    let wavy: Vec<Vec<f64>> = (0..240)
        .map(|i| {
            (0..FRAME_DIM)
                .map(|j| ((i + j) as f64 * 0.11).sin() * 0.4)
                .collect()
        })
        .collect();
    let m = MotionSequence::new(Tensor::from_rows(&wavy), fps).unwrap();
    let truth = m.slice(120, 60).unwrap();
    let d = mpd(&Truthful(truth), &m, 1.0, 2.0, 3.0).unwrap();
    assert_eq!(d, 0.0, "mpd {d}");

    pass(
        10,
        "metric oracles",
        format!(
            "fid(a,a) {self_fid:.1e}, gaussian fid {empirical:.3}, beat offset {score:.4}, pff 30.0, auc {auc:.1}, mpd 0"
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. Top-k freeze trend
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_topk_freeze_trend() {
    let fx = fixture();
    // Held-out audio: the freeze gap between greedy and top-k decoding shows
    // on clips outside the training set.
    let wild = synth_dance_corpus(3, 7777, &DanceCfg::default()).unwrap();
    let audio = wild.items[2].audio.clone().unwrap();
    let mut pff_k1 = 0.0;
    let mut pff_k10 = 0.0;
    for seed in 0..10u64 {
        for (k, acc) in [(1usize, &mut pff_k1), (10usize, &mut pff_k10)] {
            let req = GenerationRequest::music_only(audio.clone(), k, 5000 + seed);
            let (_, motion) = generate(&fx.vq, &fx.xm, &req).unwrap();
            *acc += pff(&motion, PFF_THRESHOLD, PFF_MIN_DURATION).unwrap() / 10.0;
        }
    }
    assert!(
        pff_k10 <= pff_k1 + 1e-12,
        "pff(k=10) {pff_k10:.2} > pff(k=1) {pff_k1:.2}"
    );
    pass(
        11,
        "top-k freeze trend",
        format!("mean PFF k=10 {pff_k10:.2} <= k=1 {pff_k1:.2} over 10 seeds"),
    );
}
