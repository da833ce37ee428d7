//! Freeze scores: percentage of freezing frames (PFF) and the area under
//! the PFF-versus-threshold curve (AUC_f).

use crate::error::{Error, Result};
use crate::motion::MotionSequence;

/// Default freeze speed threshold in m/s.
pub const PFF_THRESHOLD: f64 = 0.015;
/// Default minimum freeze duration in seconds. Runs of exactly this length
/// count as frozen ("exceeds" read inclusively).
pub const PFF_MIN_DURATION: f64 = 3.0;
/// Upper end of the AUC_f threshold sweep in m/s.
pub const AUCF_MAX_THRESHOLD: f64 = 0.03;
/// Number of evenly spaced thresholds in the AUC_f sweep.
pub const AUCF_STEPS: usize = 64;

/// Max-over-joints speed per frame from backward differences, with frame 0
/// copying frame 1 so every frame has a value. An exact run of L identical
/// frames therefore yields L−1 zero-speed frames strictly inside it plus the
/// entry frame, giving frame counts that match duration arithmetic exactly.
fn max_joint_speeds(m: &MotionSequence) -> Result<Vec<f64>> {
    let t = m.len();
    if t < 2 {
        return Err(Error::TooShort(format!(
            "freeze metrics need at least 2 frames, got {t}"
        )));
    }
    let joints = m.joints();
    let fps = m.fps();
    let mut speeds = Vec::with_capacity(t);
    speeds.push(0.0); // placeholder, replaced below
    for f in 1..t {
        let mut max = 0.0f64;
        for j in 0..joints {
            let a = m.joint(f - 1, j);
            let b = m.joint(f, j);
            let s = super::dist3(a, b) * fps;
            if s > max {
                max = s;
            }
        }
        speeds.push(max);
    }
    speeds[0] = speeds[1];
    Ok(speeds)
}

fn pff_from_speeds(speeds: &[f64], fps: f64, v_thresh: f64, min_duration: f64) -> f64 {
    let t = speeds.len();
    let mut frozen = 0usize;
    let mut run = 0usize;
    for (i, &s) in speeds.iter().enumerate() {
        if s < v_thresh {
            run += 1;
        }
        let run_ends = s >= v_thresh || i == t - 1;
        if run_ends && run > 0 {
            if run as f64 / fps >= min_duration {
                frozen += run;
            }
            run = 0;
        }
    }
    100.0 * frozen as f64 / t as f64
}

/// Percentage of frames inside freeze runs: frames whose max-over-joints
/// speed is below `v_thresh`, in maximal runs lasting at least
/// `min_duration` seconds.
pub fn pff(m: &MotionSequence, v_thresh: f64, min_duration: f64) -> Result<f64> {
    let speeds = max_joint_speeds(m)?;
    Ok(pff_from_speeds(&speeds, m.fps(), v_thresh, min_duration))
}

/// Trapezoidal integral of PFF(threshold) over [`AUCF_STEPS`] evenly spaced
/// thresholds in [0, t_max], normalized by t_max so the result stays on the
/// PFF percent scale.
pub fn auc_f(m: &MotionSequence, t_max: f64) -> Result<f64> {
    let t_max_valid = t_max > 0.0; // false for NaN too
    if !t_max_valid {
        return Err(Error::config(format!("auc_f needs t_max > 0, got {t_max}")));
    }
    let speeds = max_joint_speeds(m)?;
    let fps = m.fps();
    let n = AUCF_STEPS;
    let h = t_max / (n - 1) as f64;
    let mut integral = 0.0;
    let mut prev = pff_from_speeds(&speeds, fps, 0.0, PFF_MIN_DURATION);
    for k in 1..n {
        let thresh = k as f64 * h;
        let cur = pff_from_speeds(&speeds, fps, thresh, PFF_MIN_DURATION);
        integral += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    Ok(integral / t_max)
}
