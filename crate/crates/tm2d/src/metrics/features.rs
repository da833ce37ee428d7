//! Fixed-width motion descriptors that feed the Fréchet and diversity
//! metrics. Simplified stand-ins for full mocap feature banks: widths and
//! definitions are fixed here so scores are comparable within a run.

use super::{central_speeds, dist3, quantile};
use crate::error::{Error, Result};
use crate::motion::{MotionSequence, HEAD, LFOOT, LHAND, LKNEE, RFOOT, RHAND, RKNEE, ROOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Kinetic,
    Geometric,
}

/// Fixed-width descriptor of one motion sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub kind: FeatureKind,
}

/// Velocity statistics: per-joint mean squared speed and per-joint speed
/// variance, concatenated (width 2J). Speeds come from central finite
/// differences scaled by fps, so the descriptor is nearly invariant to
/// resampling the same physical trajectory.
pub fn kinetic_features(m: &MotionSequence) -> Result<FeatureVector> {
    if m.len() < 2 {
        return Err(Error::TooShort(format!(
            "kinetic features need at least 2 frames, got {}",
            m.len()
        )));
    }
    let speeds = central_speeds(m);
    let joints = m.joints();
    let n = speeds.len() as f64;
    let mut values = Vec::with_capacity(2 * joints);
    for j in 0..joints {
        let mean_sq = speeds.iter().map(|row| row[j] * row[j]).sum::<f64>() / n;
        values.push(mean_sq);
    }
    for j in 0..joints {
        let mean = speeds.iter().map(|row| row[j]).sum::<f64>() / n;
        let var = speeds
            .iter()
            .map(|row| (row[j] - mean) * (row[j] - mean))
            .sum::<f64>()
            / n;
        values.push(var);
    }
    Ok(FeatureVector {
        values,
        kind: FeatureKind::Kinetic,
    })
}

/// Time-averaged boolean pose relations (width J, each in [0, 1]):
/// feet raised above a fraction of root height, hands closer than 0.3 m,
/// root above its own median height, and four joint-pair distances above
/// their own sequence medians.
pub fn geometric_features(m: &MotionSequence) -> Result<FeatureVector> {
    if m.joints() < 8 {
        return Err(Error::dimension(format!(
            "geometric features expect the 8-joint skeleton, got {} joints",
            m.joints()
        )));
    }
    let t = m.len();
    let tf = t as f64;
    let mut lfoot_up = 0.0;
    let mut rfoot_up = 0.0;
    let mut hands_close = 0.0;
    let mut root_heights = Vec::with_capacity(t);
    let pairs = [(HEAD, ROOT), (LHAND, LFOOT), (RHAND, RFOOT), (LKNEE, RKNEE)];
    let mut pair_dists: [Vec<f64>; 4] = Default::default();

    for f in 0..t {
        let root = m.joint(f, ROOT);
        if m.joint(f, LFOOT)[1] > root[1] * 0.3 {
            lfoot_up += 1.0;
        }
        if m.joint(f, RFOOT)[1] > root[1] * 0.3 {
            rfoot_up += 1.0;
        }
        if dist3(m.joint(f, LHAND), m.joint(f, RHAND)) < 0.3 {
            hands_close += 1.0;
        }
        root_heights.push(root[1]);
        for (p, (a, b)) in pairs.iter().enumerate() {
            pair_dists[p].push(dist3(m.joint(f, *a), m.joint(f, *b)));
        }
    }

    let root_median = quantile(&root_heights, 0.5);
    let root_above = root_heights.iter().filter(|&&h| h > root_median).count() as f64 / tf;

    let mut values = vec![lfoot_up / tf, rfoot_up / tf, hands_close / tf, root_above];
    for dists in &pair_dists {
        let median = quantile(dists, 0.5);
        values.push(dists.iter().filter(|&&d| d > median).count() as f64 / tf);
    }
    Ok(FeatureVector {
        values,
        kind: FeatureKind::Geometric,
    })
}
