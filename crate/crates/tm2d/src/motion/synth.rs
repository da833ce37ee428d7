//! Seed-deterministic synthetic corpora.
//!
//! Each item derives its own generator from (seed, item index), so corpora
//! are pure functions of (n, seed, cfg) and individual items are stable when
//! n changes.

use super::*;
use crate::rng::Pcg32;
use std::f64::consts::{PI, TAU};

/// Default audio feature width: beat impulse + onset envelope + 14 harmonics.
pub const AUDIO_DIM: usize = 16;

const DANCE_STREAM: u64 = 0x6461;
const ACTION_STREAM: u64 = 0x6163;

/// Parameters of the dance-family generator.
#[derive(Debug, Clone)]
pub struct DanceCfg {
    pub fps: f64,
    pub duration_range: (f64, f64),
    pub tempo_range: (f64, f64),
    pub audio_dim: usize,
    /// Temporal downsample factor of the tokenizer; the audio feature rate is
    /// fps / downsample so features align 1:1 with motion tokens.
    pub downsample: usize,
}

impl Default for DanceCfg {
    fn default() -> Self {
        DanceCfg {
            fps: DEFAULT_FPS,
            duration_range: (6.0, 12.0),
            tempo_range: (1.0, 3.0),
            audio_dim: AUDIO_DIM,
            downsample: 8,
        }
    }
}

/// Parameters of the action-family generator.
#[derive(Debug, Clone)]
pub struct ActionCfg {
    pub fps: f64,
    pub duration_range: (f64, f64),
    pub downsample: usize,
}

impl Default for ActionCfg {
    fn default() -> Self {
        ActionCfg {
            fps: DEFAULT_FPS,
            duration_range: (2.0, 10.0),
            downsample: 8,
        }
    }
}

/// Pick a frame count: requested duration, rounded to a whole multiple of
/// the downsample factor and at least one training window long.
fn frame_count(duration: f64, fps: f64, downsample: usize) -> usize {
    let raw = (duration * fps).round() as usize;
    let t = (raw / downsample) * downsample;
    t.max(64)
}

/// Beat-locked sinusoidal dance motions paired with synthetic audio features
/// whose beat grid matches the motion tempo.
pub fn synth_dance_corpus(n: usize, seed: u64, cfg: &DanceCfg) -> Result<Corpus> {
    if n < 1 {
        return Err(Error::config("corpus size must be >= 1"));
    }
    let mut items = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = Pcg32::new(seed, DANCE_STREAM + i as u64);
        items.push(dance_item(i, &mut rng, cfg)?);
    }
    let corpus = Corpus {
        items,
        provenance: Provenance::Dance,
    };
    corpus.validate()?;
    Ok(corpus)
}

fn dance_item(index: usize, rng: &mut Pcg32, cfg: &DanceCfg) -> Result<CorpusItem> {
    let duration = rng.uniform(cfg.duration_range.0, cfg.duration_range.1);
    let t_frames = frame_count(duration, cfg.fps, cfg.downsample);
    let duration = t_frames as f64 / cfg.fps;
    let tempo = rng.uniform(cfg.tempo_range.0, cfg.tempo_range.1);

    // Pose extremes land on the beat grid: phase ±π/2 puts each joint's
    // turning point (a speed minimum) on every beat. A per-item intensity
    // factor covers the range from calm to energetic dances.
    let rest = rest_pose();
    let intensity = rng.uniform(0.35, 1.0);
    let mut amp = [0.0; JOINTS];
    let mut dir = [[0.0; 3]; JOINTS];
    let mut phase = [0.0; JOINTS];
    for j in 0..JOINTS {
        let range = match j {
            ROOT => (0.02, 0.08),
            HEAD => (0.03, 0.10),
            LHAND | RHAND => (0.15, 0.45),
            LKNEE | RKNEE => (0.05, 0.20),
            _ => (0.10, 0.30),
        };
        amp[j] = intensity * rng.uniform(range.0, range.1);
        dir[j] = random_unit(rng);
        let sign = if rng.below(2) == 0 { 1.0 } else { -1.0 };
        phase[j] = sign * PI / 2.0 + rng.uniform(-0.15, 0.15);
    }
    // Slow horizontal drift carries the whole body.
    let drift_freq = rng.uniform(0.05, 0.20);
    let drift_amp = (rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8));
    let drift_phase = (rng.uniform(0.0, TAU), rng.uniform(0.0, TAU));

    let mut data = Vec::with_capacity(t_frames * FRAME_DIM);
    for f in 0..t_frames {
        let t = f as f64 / cfg.fps;
        let dx = drift_amp.0 * (TAU * drift_freq * t + drift_phase.0).sin();
        let dz = drift_amp.1 * (TAU * drift_freq * t + drift_phase.1).sin();
        for j in 0..JOINTS {
            let osc = amp[j] * (TAU * tempo * t + phase[j]).sin();
            data.push(rest[j][0] + dx + osc * dir[j][0]);
            data.push(rest[j][1] + osc * dir[j][1]);
            data.push(rest[j][2] + dz + osc * dir[j][2]);
        }
    }
    let motion = MotionSequence::new(Tensor::new(vec![t_frames, FRAME_DIM], data)?, cfg.fps)?;

    let mut beats = Vec::new();
    let mut k = 0u32;
    loop {
        let tb = k as f64 / tempo;
        if tb >= duration {
            break;
        }
        beats.push(tb);
        k += 1;
    }
    let rate = cfg.fps / cfg.downsample as f64;
    let mut audio_rng = rng.split(1);
    let audio = synth_audio_features_with(&beats, duration, rate, cfg.audio_dim, &mut audio_rng)?;

    Ok(CorpusItem {
        motion,
        audio: Some(audio),
        text: None,
        label: format!("dance_{index:03}"),
    })
}

/// The six action primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Jump,
    Spin,
    Walk,
    Wave,
    Crouch,
    Kick,
}

pub const PRIMITIVES: [Primitive; 6] = [
    Primitive::Jump,
    Primitive::Spin,
    Primitive::Walk,
    Primitive::Wave,
    Primitive::Crouch,
    Primitive::Kick,
];

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Jump => "jump",
            Primitive::Spin => "spin",
            Primitive::Walk => "walk",
            Primitive::Wave => "wave",
            Primitive::Crouch => "crouch",
            Primitive::Kick => "kick",
        }
    }
}

/// Parameterized action motions paired with templated text descriptions.
/// Primitives cycle with the item index so every family is always present.
pub fn synth_action_corpus(n: usize, seed: u64, cfg: &ActionCfg) -> Result<Corpus> {
    if n < 1 {
        return Err(Error::config("corpus size must be >= 1"));
    }
    let mut items = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = Pcg32::new(seed, ACTION_STREAM + i as u64);
        let primitive = PRIMITIVES[i % PRIMITIVES.len()];
        items.push(action_item(i, primitive, &mut rng, cfg)?);
    }
    let corpus = Corpus {
        items,
        provenance: Provenance::Action,
    };
    corpus.validate()?;
    Ok(corpus)
}

fn action_item(
    index: usize,
    primitive: Primitive,
    rng: &mut Pcg32,
    cfg: &ActionCfg,
) -> Result<CorpusItem> {
    let duration = rng.uniform(cfg.duration_range.0, cfg.duration_range.1);
    let t_frames = frame_count(duration, cfg.fps, cfg.downsample);
    let speed = rng.uniform(0.6, 1.5);
    let scale = rng.uniform(0.6, 1.5);

    // Two layers of secondary movement: low-amplitude smooth noise, plus a
    // per-joint wobble reaching into the faster register so the action
    // family overlaps the calm end of the dance family.
    let mut noise = Vec::with_capacity(FRAME_DIM);
    for _ in 0..FRAME_DIM {
        noise.push((
            rng.uniform(0.004, 0.012),
            rng.uniform(0.3, 1.2),
            rng.uniform(0.0, TAU),
        ));
    }
    let mut wobble = Vec::with_capacity(JOINTS);
    for _ in 0..JOINTS {
        wobble.push((
            scale * rng.uniform(0.02, 0.08),
            rng.uniform(0.8, 2.2),
            rng.uniform(0.0, TAU),
            random_unit(rng),
        ));
    }

    let rest = rest_pose();
    let mut data = Vec::with_capacity(t_frames * FRAME_DIM);
    for f in 0..t_frames {
        let t = f as f64 / cfg.fps;
        let mut frame = [[0.0f64; 3]; JOINTS];
        for (j, p) in frame.iter_mut().enumerate() {
            *p = rest[j];
        }
        apply_primitive(primitive, &mut frame, t, speed, scale);
        for (c, (amp, freq, ph)) in noise.iter().enumerate() {
            frame[c / 3][c % 3] += amp * (TAU * freq * t + ph).sin();
        }
        for (j, (amp, freq, ph, dir)) in wobble.iter().enumerate() {
            let osc = amp * (TAU * freq * t + ph).sin();
            frame[j][0] += osc * dir[0];
            frame[j][1] += osc * dir[1];
            frame[j][2] += osc * dir[2];
        }
        for p in frame {
            data.extend_from_slice(&p);
        }
    }
    let motion = MotionSequence::new(Tensor::new(vec![t_frames, FRAME_DIM], data)?, cfg.fps)?;
    let text = describe(primitive, speed, rng);

    Ok(CorpusItem {
        motion,
        audio: None,
        text: Some(text),
        label: format!("action_{}_{index:03}", primitive.name()),
    })
}

fn apply_primitive(p: Primitive, frame: &mut [[f64; 3]; JOINTS], t: f64, speed: f64, scale: f64) {
    match p {
        Primitive::Jump => {
            // Smooth non-negative bursts; whole body lifts, knees tuck.
            let f = 0.8 * speed;
            let lift = 0.18 * scale * (TAU * f * t).sin().max(0.0).powi(2);
            for p in frame.iter_mut() {
                p[1] += lift;
            }
            frame[LKNEE][1] += 0.5 * lift;
            frame[RKNEE][1] += 0.5 * lift;
        }
        Primitive::Spin => {
            // Rotate every joint around the vertical axis through the root.
            let omega = TAU * 0.4 * speed;
            let (s, c) = (omega * t).sin_cos();
            let (rx, rz) = (frame[ROOT][0], frame[ROOT][2]);
            for p in frame.iter_mut() {
                let (x, z) = (p[0] - rx, p[2] - rz);
                p[0] = rx + c * x - s * z;
                p[2] = rz + s * x + c * z;
            }
        }
        Primitive::Walk => {
            let v = 0.7 * speed;
            let f = 1.5 * speed;
            let stride = (TAU * f * t).sin();
            for p in frame.iter_mut() {
                p[0] += v * t;
            }
            frame[LFOOT][0] += 0.25 * scale * stride;
            frame[RFOOT][0] -= 0.25 * scale * stride;
            frame[LFOOT][1] += 0.06 * scale * stride.max(0.0);
            frame[RFOOT][1] += 0.06 * scale * (-stride).max(0.0);
            frame[LHAND][0] -= 0.15 * scale * stride;
            frame[RHAND][0] += 0.15 * scale * stride;
        }
        Primitive::Wave => {
            let f = 1.8 * speed;
            let s = (TAU * f * t).sin();
            frame[RHAND][1] += 0.55 * scale + 0.12 * scale * s.abs();
            frame[RHAND][0] += 0.20 * scale * s;
        }
        Primitive::Crouch => {
            // Slow dip-and-rise cycles.
            let f = 0.35 * speed;
            let dip = 0.28 * scale * (1.0 - (TAU * f * t).cos()) / 2.0;
            for j in [ROOT, HEAD, LHAND, RHAND] {
                frame[j][1] -= dip;
            }
            frame[LKNEE][1] -= 0.5 * dip;
            frame[RKNEE][1] -= 0.5 * dip;
            frame[LKNEE][2] += 0.3 * dip;
            frame[RKNEE][2] += 0.3 * dip;
        }
        Primitive::Kick => {
            let f = 1.0 * speed;
            let kick = (TAU * f * t).sin().max(0.0).powi(3);
            frame[RFOOT][2] += 0.45 * scale * kick;
            frame[RFOOT][1] += 0.20 * scale * kick;
            frame[RKNEE][2] += 0.25 * scale * kick;
            frame[ROOT][2] -= 0.05 * scale * kick;
        }
    }
}

fn describe(p: Primitive, speed: f64, rng: &mut Pcg32) -> String {
    let subject = *rng.choose(&["a person", "the man", "the woman", "someone"]);
    let body = match p {
        Primitive::Jump => *rng.choose(&["jumps up and down", "is jumping repeatedly"]),
        Primitive::Spin => *rng.choose(&["spins around in place", "is turning in a circle"]),
        Primitive::Walk => *rng.choose(&["walks forward", "is walking straight ahead"]),
        Primitive::Wave => *rng.choose(&["waves their right hand", "is waving one arm"]),
        Primitive::Crouch => {
            *rng.choose(&["crouches down and stands back up", "is squatting down low"])
        }
        Primitive::Kick => *rng.choose(&["kicks with their right leg", "is kicking forward"]),
    };
    let adverb = if speed < 0.85 {
        " slowly"
    } else if speed > 1.15 {
        " quickly"
    } else {
        ""
    };
    format!("{subject} {body}{adverb}")
}

fn random_unit(rng: &mut Pcg32) -> [f64; 3] {
    loop {
        let v = [
            rng.uniform(-1.0, 1.0),
            rng.uniform(-1.0, 1.0),
            rng.uniform(-1.0, 1.0),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 0.1 && norm <= 1.0 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}

/// Synthesize audio features for a given beat grid.
///
/// Channel 0 is a beat impulse (1.0 in the feature frame nearest each beat),
/// channel 1 a decaying onset envelope, and the rest smooth band-limited
/// noise. `dim` must be at least 2.
pub fn synth_audio_features(
    beat_times: &[f64],
    duration: f64,
    rate: f64,
    seed: u64,
) -> Result<AudioFeatureSeq> {
    let mut rng = Pcg32::new(seed, 0xa0d10);
    synth_audio_features_with(beat_times, duration, rate, AUDIO_DIM, &mut rng)
}

fn synth_audio_features_with(
    beat_times: &[f64],
    duration: f64,
    rate: f64,
    dim: usize,
    rng: &mut Pcg32,
) -> Result<AudioFeatureSeq> {
    let rate_valid = rate > 0.0; // false for NaN too
    if !rate_valid {
        return Err(Error::config(format!("audio rate must be positive, got {rate}")));
    }
    if dim < 2 {
        return Err(Error::config("audio feature dim must be >= 2"));
    }
    if let Some(&bad) = beat_times.iter().find(|&&b| b < 0.0 || b > duration) {
        return Err(Error::Range(format!(
            "beat time {bad} outside [0, {duration}]"
        )));
    }
    let frames = (duration * rate).round() as usize;
    if frames == 0 {
        return Err(Error::TooShort(format!(
            "duration {duration} at rate {rate} yields no feature frames"
        )));
    }
    let mut features = Tensor::zeros(&[frames, dim]);

    // Beat impulse channel.
    for &b in beat_times {
        let idx = ((b * rate).round() as usize).min(frames - 1);
        features.row_mut(idx)[0] = 1.0;
    }
    // Onset envelope: decaying exponential after each beat.
    let decay = 4.0;
    for f in 0..frames {
        let t = f as f64 / rate;
        let mut onset = 0.0;
        for &b in beat_times {
            if t >= b {
                onset += (-(t - b) * decay).exp();
            }
        }
        features.row_mut(f)[1] = onset;
    }
    // Smooth harmonic channels: a few random sinusoids each.
    for ch in 2..dim {
        let mut parts = Vec::new();
        for _ in 0..3 {
            parts.push((
                rng.uniform(0.2, 0.6),
                rng.uniform(0.2, 2.5),
                rng.uniform(0.0, TAU),
            ));
        }
        for f in 0..frames {
            let t = f as f64 / rate;
            let v: f64 = parts
                .iter()
                .map(|(a, fr, ph)| a * (TAU * fr * t + ph).sin())
                .sum();
            features.row_mut(f)[ch] = v;
        }
    }
    features.assert_finite("audio features")?;
    Ok(AudioFeatureSeq {
        features,
        rate,
        beat_times: beat_times.to_vec(),
    })
}
