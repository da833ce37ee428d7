//! Dance beat extraction and the beat alignment score.

use super::{central_speeds, quantile};
use crate::error::{Error, Result};
use crate::motion::MotionSequence;

/// Gaussian kernel width of the beat alignment score. Beat times carry
/// whatever unit the caller supplies (seconds in this crate).
pub const BEAT_SIGMA: f64 = 3.0;

/// Strictly increasing beat timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatList {
    times: Vec<f64>,
}

impl BeatList {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("beat times must be strictly increasing".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric("non-finite beat time".into()));
        }
        Ok(BeatList { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Kinematic dance beats: local minima of the joint-mean speed after
/// 5-frame box smoothing, kept only when below the sequence's median speed.
pub fn dance_beats(m: &MotionSequence) -> Result<BeatList> {
    if m.len() < 3 {
        return Err(Error::TooShort(format!(
            "dance beats need at least 3 frames, got {}",
            m.len()
        )));
    }
    let speeds = central_speeds(m);
    let joints = m.joints() as f64;
    // Mean joint speed per interior frame; sample i corresponds to frame i+1.
    let mean_speed: Vec<f64> = speeds
        .iter()
        .map(|row| row.iter().sum::<f64>() / joints)
        .collect();
    let smoothed = box_smooth(&mean_speed, 5);
    // The margin keeps float noise on (near-)constant speed profiles from
    // registering as beats.
    let peak = smoothed.iter().copied().fold(0.0, f64::max);
    let cutoff = quantile(&smoothed, 0.5) - 1e-9 * peak;

    let mut times = Vec::new();
    for i in 1..smoothed.len().saturating_sub(1) {
        let is_min = smoothed[i] < smoothed[i - 1] && smoothed[i] < smoothed[i + 1];
        if is_min && smoothed[i] < cutoff {
            times.push((i + 1) as f64 / m.fps());
        }
    }
    BeatList::new(times)
}

fn box_smooth(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = xs.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Mean Gaussian-kernel proximity of each music beat to its nearest dance
/// beat: (1/|B^m|) Σ exp(−min‖b^d − b^m‖² / (2σ²)). An empty dance list
/// scores 0; an empty music list is defined as 0 as well.
pub fn beat_align(music: &BeatList, dance: &BeatList, sigma: f64) -> f64 {
    if music.is_empty() || dance.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &bm in music.times() {
        let nearest = dance
            .times()
            .iter()
            .map(|&bd| (bd - bm) * (bd - bm))
            .fold(f64::INFINITY, f64::min);
        total += (-nearest / (2.0 * sigma * sigma)).exp();
    }
    total / music.len() as f64
}
