//! Shared-latent-space diagnostics: which codebook entries each corpus uses,
//! how many are shared, and how usage evolves over training.

use crate::error::{Error, Result};
use crate::linalg::{mean_and_cov, sym_eig};
use crate::vqvae::{TokenSeq, UsageEpoch};

/// Usage overlap between two corpora over one codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageStats {
    pub total_k: usize,
    pub used_a: usize,
    pub used_b: usize,
    pub shared: usize,
    /// 100 · shared / used_a (0 when corpus a uses nothing).
    pub pct_a: f64,
    /// 100 · shared / used_b.
    pub pct_b: f64,
    /// Per-token frequency, normalized by total frames of corpus a.
    pub histogram_a: Vec<f64>,
    pub histogram_b: Vec<f64>,
}

/// Aggregate usage statistics from raw token counts per corpus.
pub fn usage_from_counts(counts_a: &[u64], counts_b: &[u64], k: usize) -> Result<UsageStats> {
    if counts_a.len() != k || counts_b.len() != k {
        return Err(Error::dimension(format!(
            "count arrays must have length K = {k}, got {} and {}",
            counts_a.len(),
            counts_b.len()
        )));
    }
    let used_a = counts_a.iter().filter(|&&c| c > 0).count();
    let used_b = counts_b.iter().filter(|&&c| c > 0).count();
    let shared = counts_a
        .iter()
        .zip(counts_b)
        .filter(|(&a, &b)| a > 0 && b > 0)
        .count();
    let norm = |counts: &[u64]| -> Vec<f64> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        }
    };
    let pct = |used: usize| if used == 0 { 0.0 } else { 100.0 * shared as f64 / used as f64 };
    Ok(UsageStats {
        total_k: k,
        used_a,
        used_b,
        shared,
        pct_a: pct(used_a),
        pct_b: pct(used_b),
        histogram_a: norm(counts_a),
        histogram_b: norm(counts_b),
    })
}

/// Usage statistics from token sequences of two corpora.
pub fn usage_stats(tokens_a: &[TokenSeq], tokens_b: &[TokenSeq], k: usize) -> Result<UsageStats> {
    let count = |seqs: &[TokenSeq]| -> Result<Vec<u64>> {
        let mut counts = vec![0u64; k];
        for seq in seqs {
            for &t in seq {
                let idx = t as usize;
                if idx >= k {
                    return Err(Error::Range(format!("token {t} out of range for K = {k}")));
                }
                counts[idx] += 1;
            }
        }
        Ok(counts)
    };
    usage_from_counts(&count(tokens_a)?, &count(tokens_b)?, k)
}

/// One point of the per-epoch usage series.
#[derive(Debug, Clone)]
pub struct EpochUsage {
    pub step_end: usize,
    /// Usage within this interval alone (may fluctuate across epochs).
    pub interval: UsageStats,
    /// Usage accumulated from the start of training (monotone).
    pub cumulative: UsageStats,
}

/// Turn per-interval usage dumps from a training log into interval and
/// cumulative statistics series.
pub fn usage_over_epochs(epochs: &[UsageEpoch], k: usize) -> Result<Vec<EpochUsage>> {
    let mut cum_a = vec![0u64; k];
    let mut cum_b = vec![0u64; k];
    let mut out = Vec::with_capacity(epochs.len());
    for e in epochs {
        if e.dance.len() != k || e.action.len() != k {
            return Err(Error::dimension(format!(
                "usage dump width mismatch: expected {k}"
            )));
        }
        for (acc, &c) in cum_a.iter_mut().zip(&e.dance) {
            *acc += c;
        }
        for (acc, &c) in cum_b.iter_mut().zip(&e.action) {
            *acc += c;
        }
        out.push(EpochUsage {
            step_end: e.step_end,
            interval: usage_from_counts(&e.dance, &e.action, k)?,
            cumulative: usage_from_counts(&cum_a, &cum_b, k)?,
        });
    }
    Ok(out)
}

/// Project rows onto their top two principal components (for plotting).
pub fn pca_2d(rows: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    if rows.len() < 3 {
        return Err(Error::TooShort(format!(
            "pca needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    let (mean, cov) = mean_and_cov(rows)?;
    let (vals, vecs) = sym_eig(&cov)?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let (c1, c2) = (order[0], order[1]);
    Ok(rows
        .iter()
        .map(|r| {
            let mut p = [0.0; 2];
            for (j, (&x, &m)) in r.iter().zip(&mean).enumerate() {
                let centered = x - m;
                p[0] += centered * vecs.at2(j, c1);
                p[1] += centered * vecs.at2(j, c2);
            }
            p
        })
        .collect())
}
