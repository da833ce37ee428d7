//! Motion prediction distance with a pluggable multi-hypothesis predictor.
//!
//! MPD measures how far the actually generated continuation lies from the
//! nearest of several futures a predictor considers plausible given only the
//! past. Small values mean the transition is coherent.

use super::kinetic_features;
use crate::error::{Error, Result};
use crate::motion::{Corpus, MotionSequence, ROOT};
use crate::tensor::Tensor;

/// Multi-hypothesis future-motion predictor.
pub trait PredictorOracle {
    /// Hypothesized futures of `future_len` frames following `past`.
    /// Must return at least one hypothesis.
    fn predict(&self, past: &MotionSequence, future_len: usize) -> Result<Vec<MotionSequence>>;
}

/// Minimum over hypotheses of the Euclidean distance between the predicted
/// future and the actual continuation of `m`, normalized by
/// sqrt(frames × d_m) so the value is a per-element distance.
///
/// `t0 < t1 < t2` are timestamps in seconds within the motion: the oracle
/// sees [t0, t1) and predicts [t1, t2).
pub fn mpd(
    oracle: &dyn PredictorOracle,
    m: &MotionSequence,
    t0: f64,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    if !(t0 < t1 && t1 < t2) {
        return Err(Error::Range(format!(
            "timestamps must satisfy t0 < t1 < t2, got {t0}, {t1}, {t2}"
        )));
    }
    if t2 > m.duration() + 1e-9 {
        return Err(Error::Range(format!(
            "t2 = {t2}s beyond motion duration {:.3}s",
            m.duration()
        )));
    }
    let fps = m.fps();
    let f0 = (t0 * fps).round() as usize;
    let f1 = (t1 * fps).round() as usize;
    let f2 = ((t2 * fps).round() as usize).min(m.len());
    if f1 <= f0 || f2 <= f1 {
        return Err(Error::TooShort(format!(
            "timestamps map to empty segments: frames {f0}, {f1}, {f2}"
        )));
    }
    let past = m.slice(f0, f1 - f0)?;
    let truth = m.slice(f1, f2 - f1)?;
    let future_len = f2 - f1;

    let hypotheses = oracle.predict(&past, future_len)?;
    if hypotheses.is_empty() {
        return Err(Error::Contract("predictor returned no hypotheses".into()));
    }
    let norm = ((future_len * m.dim()) as f64).sqrt();
    let mut best = f64::INFINITY;
    for h in &hypotheses {
        if h.len() != future_len || h.dim() != m.dim() {
            return Err(Error::Contract(format!(
                "hypothesis shape [{}, {}] does not match requested [{future_len}, {}]",
                h.len(),
                h.dim(),
                m.dim()
            )));
        }
        let d: f64 = h
            .frames()
            .data()
            .iter()
            .zip(truth.frames().data())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        best = best.min(d / norm);
    }
    Ok(best)
}

/// Nearest-neighbor predictor over a reference corpus: finds the k windows
/// whose past segments are closest in kinetic-feature space and returns
/// their continuations, root-aligned to the query past.
pub struct KnnPredictor {
    past_len: usize,
    k: usize,
    // (past kinetic features, past last-frame root, continuation frames)
    windows: Vec<(Vec<f64>, [f64; 3], Tensor)>,
    fps: f64,
}

/// Build a [`KnnPredictor`] from every (past_len + future_len)-frame window
/// of the reference corpus (stride 1, so any aligned query window from the
/// same corpus is guaranteed to be present).
pub fn knn_predictor(
    reference: &Corpus,
    k: usize,
    past_len: usize,
    future_len: usize,
) -> Result<KnnPredictor> {
    if k == 0 || past_len < 2 || future_len == 0 {
        return Err(Error::config(
            "knn predictor needs k >= 1, past_len >= 2, future_len >= 1",
        ));
    }
    let total = past_len + future_len;
    let mut windows = Vec::new();
    let mut fps = None;
    for item in &reference.items {
        let m = &item.motion;
        *fps.get_or_insert(m.fps()) = m.fps();
        if m.len() < total {
            continue;
        }
        for start in 0..=(m.len() - total) {
            let past = m.slice(start, past_len)?;
            let features = kinetic_features(&past)?.values;
            let anchor = past.joint(past_len - 1, ROOT);
            let future = m.slice(start + past_len, future_len)?;
            windows.push((features, anchor, future.frames().clone()));
        }
    }
    if windows.len() < k {
        return Err(Error::TooShort(format!(
            "reference corpus yields {} windows, need at least k = {k}",
            windows.len()
        )));
    }
    Ok(KnnPredictor {
        past_len,
        k,
        windows,
        fps: fps.unwrap_or(crate::motion::DEFAULT_FPS),
    })
}

impl PredictorOracle for KnnPredictor {
    fn predict(&self, past: &MotionSequence, future_len: usize) -> Result<Vec<MotionSequence>> {
        if past.len() < 2 {
            return Err(Error::TooShort("query past needs at least 2 frames".into()));
        }
        // Feature distance is computed on the query as-is; the stored
        // windows used past_len frames, the query may differ slightly.
        let _ = self.past_len;
        let query = kinetic_features(past)?.values;
        let anchor = past.joint(past.len() - 1, ROOT);

        let mut scored: Vec<(f64, usize)> = self
            .windows
            .iter()
            .enumerate()
            .map(|(i, (f, _, _))| {
                let d: f64 = f
                    .iter()
                    .zip(&query)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum();
                (d, i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let joints = past.joints();
        let mut out = Vec::with_capacity(self.k);
        for &(_, idx) in scored.iter().take(self.k) {
            let (_, ref_anchor, future) = &self.windows[idx];
            let delta = [
                anchor[0] - ref_anchor[0],
                anchor[1] - ref_anchor[1],
                anchor[2] - ref_anchor[2],
            ];
            let mut frames = future.clone();
            if future_len != frames.rows() {
                let take = future_len.min(frames.rows());
                let d = frames.cols();
                let data = frames.data()[..take * d].to_vec();
                frames = Tensor::new(vec![take, d], data)?;
            }
            for f in 0..frames.rows() {
                let row = frames.row_mut(f);
                for j in 0..joints {
                    row[j * 3] += delta[0];
                    row[j * 3 + 1] += delta[1];
                    row[j * 3 + 2] += delta[2];
                }
            }
            if frames.rows() != future_len {
                return Err(Error::Contract(format!(
                    "stored window has {} future frames, caller asked for {future_len}",
                    frames.rows()
                )));
            }
            out.push(MotionSequence::new(frames, self.fps)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{synth_dance_corpus, DanceCfg, FRAME_DIM};

    struct FixedOracle(Vec<MotionSequence>);

    impl PredictorOracle for FixedOracle {
        fn predict(&self, _past: &MotionSequence, _len: usize) -> Result<Vec<MotionSequence>> {
            Ok(self.0.clone())
        }
    }

    fn wavy_motion(t: usize, fps: f64) -> MotionSequence {
        let frames: Vec<Vec<f64>> = (0..t)
            .map(|i| {
                let s = i as f64 / fps;
                (0..FRAME_DIM)
                    .map(|j| ((j + 1) as f64 * 0.37 * s).sin() * 0.3)
                    .collect()
            })
            .collect();
        MotionSequence::new(Tensor::from_rows(&frames), fps).unwrap()
    }

    #[test]
    fn truth_among_hypotheses_scores_zero() {
        let fps = 60.0;
        let m = wavy_motion(240, fps);
        let truth = m.slice(120, 60).unwrap();
        let decoy = wavy_motion(60, fps);
        let oracle = FixedOracle(vec![decoy, truth]);
        let d = mpd(&oracle, &m, 1.0, 2.0, 3.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn constant_offset_hypothesis_scores_the_offset() {
        let fps = 60.0;
        let m = wavy_motion(240, fps);
        let truth = m.slice(120, 60).unwrap();
        let delta = 0.37;
        let shifted =
            MotionSequence::new(truth.frames().map(|v| v + delta), fps).unwrap();
        let oracle = FixedOracle(vec![shifted]);
        let d = mpd(&oracle, &m, 1.0, 2.0, 3.0).unwrap();
        assert!((d - delta).abs() < 1e-12, "mpd {d}");
    }

    #[test]
    fn more_hypotheses_never_increase_mpd() {
        let fps = 60.0;
        let m = wavy_motion(240, fps);
        let truth = m.slice(120, 60).unwrap();
        let far = MotionSequence::new(truth.frames().map(|v| v + 1.0), fps).unwrap();
        let near = MotionSequence::new(truth.frames().map(|v| v + 0.1), fps).unwrap();
        let one = mpd(&FixedOracle(vec![far.clone()]), &m, 1.0, 2.0, 3.0).unwrap();
        let two = mpd(&FixedOracle(vec![far, near]), &m, 1.0, 2.0, 3.0).unwrap();
        assert!(two <= one);
    }

    #[test]
    fn wrong_length_hypothesis_is_a_contract_error() {
        let fps = 60.0;
        let m = wavy_motion(240, fps);
        let short = m.slice(0, 10).unwrap();
        let oracle = FixedOracle(vec![short]);
        assert!(matches!(
            mpd(&oracle, &m, 1.0, 2.0, 3.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn knn_retrieves_exact_match_for_reference_query() {
        let corpus = synth_dance_corpus(3, 21, &DanceCfg::default()).unwrap();
        let oracle = knn_predictor(&corpus, 3, 25, 30).unwrap();
        let m = &corpus.items[0].motion;
        // Query aligned to the window grid: past [60, 85), future [85, 115).
        let fps = m.fps();
        let d = mpd(&oracle, m, 60.0 / fps, 85.0 / fps, 115.0 / fps).unwrap();
        assert!(d < 1e-12, "mpd {d}");
    }

    #[test]
    fn knn_more_neighbors_never_increase_mpd() {
        let corpus = synth_dance_corpus(3, 22, &DanceCfg::default()).unwrap();
        let query = synth_dance_corpus(1, 99, &DanceCfg::default()).unwrap();
        let m = &query.items[0].motion;
        let fps = m.fps();
        let args = (50.0 / fps, 75.0 / fps, 105.0 / fps);
        let k1 = knn_predictor(&corpus, 1, 25, 30).unwrap();
        let k10 = knn_predictor(&corpus, 10, 25, 30).unwrap();
        let d1 = mpd(&k1, m, args.0, args.1, args.2).unwrap();
        let d10 = mpd(&k10, m, args.0, args.1, args.2).unwrap();
        assert!(d10 <= d1, "k=10 {d10} vs k=1 {d1}");
    }

    #[test]
    fn knn_returns_exactly_k_hypotheses() {
        let corpus = synth_dance_corpus(2, 23, &DanceCfg::default()).unwrap();
        let oracle = knn_predictor(&corpus, 7, 25, 30).unwrap();
        let past = corpus.items[0].motion.slice(0, 25).unwrap();
        let hyps = oracle.predict(&past, 30).unwrap();
        assert_eq!(hyps.len(), 7);
    }

    #[test]
    fn knn_insufficient_reference_is_an_error() {
        let corpus = synth_dance_corpus(1, 24, &DanceCfg::default()).unwrap();
        // One motion of ~N frames yields fewer than 1e9 windows.
        assert!(knn_predictor(&corpus, 1_000_000_000, 25, 30).is_err());
    }
}
