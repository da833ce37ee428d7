//! Evaluation metrics: kinetic/geometric motion features, Fréchet distance,
//! diversity, beat alignment, freeze scores (PFF, AUC_f), and motion
//! prediction distance with a pluggable multi-hypothesis predictor.
//!
//! All functions here are pure; anything random takes an explicit seed.

mod features;
mod frechet;
mod freeze;
mod predictor;
mod rhythm;

pub use features::{geometric_features, kinetic_features, FeatureKind, FeatureVector};
pub use frechet::{diversity, fid, fid_from_stats};
pub use freeze::{auc_f, pff, AUCF_MAX_THRESHOLD, AUCF_STEPS, PFF_MIN_DURATION, PFF_THRESHOLD};
pub use predictor::{knn_predictor, mpd, KnnPredictor, PredictorOracle};
pub use rhythm::{beat_align, dance_beats, BeatList, BEAT_SIGMA};

use crate::motion::MotionSequence;

/// Per-frame speed magnitude of every joint, estimated with central finite
/// differences on interior frames (one-sided for T = 2). Scaled by fps, so
/// values are meters per second. Returns one row of J speeds per sample.
pub(crate) fn central_speeds(m: &MotionSequence) -> Vec<Vec<f64>> {
    let t = m.len();
    let j = m.joints();
    let fps = m.fps();
    if t == 2 {
        let mut row = Vec::with_capacity(j);
        for joint in 0..j {
            let a = m.joint(0, joint);
            let b = m.joint(1, joint);
            row.push(dist3(a, b) * fps);
        }
        return vec![row];
    }
    let mut out = Vec::with_capacity(t.saturating_sub(2));
    for f in 1..t - 1 {
        let mut row = Vec::with_capacity(j);
        for joint in 0..j {
            let prev = m.joint(f - 1, joint);
            let next = m.joint(f + 1, joint);
            let v = [
                (next[0] - prev[0]) * 0.5 * fps,
                (next[1] - prev[1]) * 0.5 * fps,
                (next[2] - prev[2]) * 0.5 * fps,
            ];
            row.push((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        }
        out.push(row);
    }
    out
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Linearly interpolated quantile of unsorted data; q in [0, 1].
pub(crate) fn quantile(values: &[f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}
