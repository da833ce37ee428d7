//! Fréchet distance between Gaussian fits of feature sets, and pairwise
//! feature diversity.

use super::FeatureVector;
use crate::error::{Error, Result};
use crate::linalg::{matmul, mean_and_cov, sym_sqrt};
use crate::rng::Pcg32;
use crate::tensor::Tensor;

/// Fréchet distance between two feature sets:
/// ‖μ_a − μ_b‖² + Tr(Σ_a + Σ_b − 2(Σ_a Σ_b)^{1/2}).
///
/// The matrix square root is taken through the symmetrized product
/// √Σ_a · Σ_b · √Σ_a, whose eigenvalues are clamped at zero when they are
/// within −1e-8 of it.
pub fn fid(set_a: &[FeatureVector], set_b: &[FeatureVector]) -> Result<f64> {
    let rows = |set: &[FeatureVector]| -> Result<Vec<Vec<f64>>> {
        if set.len() < 2 {
            return Err(Error::TooShort(format!(
                "fid needs at least 2 feature vectors per set, got {}",
                set.len()
            )));
        }
        Ok(set.iter().map(|f| f.values.clone()).collect())
    };
    let a = rows(set_a)?;
    let b = rows(set_b)?;
    if a[0].len() != b[0].len() {
        return Err(Error::dimension(format!(
            "feature widths differ: {} vs {}",
            a[0].len(),
            b[0].len()
        )));
    }
    let (mu_a, cov_a) = mean_and_cov(&a)?;
    let (mu_b, cov_b) = mean_and_cov(&b)?;
    fid_from_stats(&mu_a, &cov_a, &mu_b, &cov_b)
}

/// Fréchet distance from already-computed Gaussian statistics.
pub fn fid_from_stats(mu_a: &[f64], cov_a: &Tensor, mu_b: &[f64], cov_b: &Tensor) -> Result<f64> {
    if mu_a.len() != mu_b.len() || cov_a.shape() != cov_b.shape() {
        return Err(Error::dimension(format!(
            "stat widths differ: {} vs {}",
            mu_a.len(),
            mu_b.len()
        )));
    }
    let mean_term: f64 = mu_a
        .iter()
        .zip(mu_b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();

    let root_a = sym_sqrt(cov_a)?;
    let inner = matmul(&matmul(&root_a, cov_b), &root_a);
    let (vals, _) = crate::linalg::sym_eig(&inner)?;
    let mut trace_sqrt = 0.0;
    for v in vals {
        let v = if v < 0.0 {
            if v > -1e-8 {
                0.0
            } else {
                return Err(Error::Numeric(format!(
                    "covariance product has eigenvalue {v}"
                )));
            }
        } else {
            v
        };
        trace_sqrt += v.sqrt();
    }
    let trace = |m: &Tensor| (0..m.rows()).map(|i| m.at2(i, i)).sum::<f64>();
    Ok(mean_term + trace(cov_a) + trace(cov_b) - 2.0 * trace_sqrt)
}

/// Mean Euclidean distance over sampled distinct pairs. `n_pairs == 0` or
/// `n_pairs >=` the number of unordered pairs averages over all of them.
pub fn diversity(set: &[FeatureVector], n_pairs: usize, seed: u64) -> Result<f64> {
    let n = set.len();
    if n < 2 {
        return Err(Error::TooShort(format!(
            "diversity needs at least 2 feature vectors, got {n}"
        )));
    }
    let dist = |i: usize, j: usize| -> f64 {
        set[i]
            .values
            .iter()
            .zip(&set[j].values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let all_pairs = n * (n - 1) / 2;
    if n_pairs == 0 || n_pairs >= all_pairs {
        let mut sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += dist(i, j);
            }
        }
        return Ok(sum / all_pairs as f64);
    }
    let mut rng = Pcg32::new(seed, 0xd1f);
    let mut sum = 0.0;
    for _ in 0..n_pairs {
        let i = rng.below(n as u64) as usize;
        let mut j = rng.below(n as u64 - 1) as usize;
        if j >= i {
            j += 1;
        }
        sum += dist(i, j);
    }
    Ok(sum / n_pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FeatureKind;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            values,
            kind: FeatureKind::Kinetic,
        }
    }

    #[test]
    fn identical_sets_have_zero_fid() {
        // Full-rank covariance; a singular one would push sqrt-of-eigenvalue
        // noise above the tolerance.
        let mut rng = Pcg32::seeded(77);
        let set: Vec<FeatureVector> = (0..40)
            .map(|_| fv(vec![rng.normal(), 2.0 * rng.normal(), 0.5 * rng.normal()]))
            .collect();
        let d = fid(&set, &set).unwrap();
        assert!(d.abs() < 1e-9, "fid {d}");
    }

    #[test]
    fn unit_gaussians_one_apart_from_population_stats() {
        // N(0,1) vs N(1,1) in 1-D: (Δμ)² + (σ_a − σ_b)² = 1.
        let cov = Tensor::from_rows(&[vec![1.0]]);
        let d = fid_from_stats(&[0.0], &cov, &[1.0], &cov).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "fid {d}");
    }

    #[test]
    fn empirical_gaussian_fid_close_to_one() {
        let mut rng = Pcg32::seeded(1234);
        let a: Vec<FeatureVector> = (0..5000).map(|_| fv(vec![rng.normal()])).collect();
        let b: Vec<FeatureVector> = (0..5000).map(|_| fv(vec![rng.normal() + 1.0])).collect();
        let d = fid(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 0.05, "fid {d}");
    }

    #[test]
    fn fid_is_symmetric_and_rejects_width_mismatch() {
        let mut rng = Pcg32::seeded(5);
        let a: Vec<FeatureVector> = (0..20)
            .map(|_| fv(vec![rng.normal(), rng.normal() * 2.0]))
            .collect();
        let b: Vec<FeatureVector> = (0..20)
            .map(|_| fv(vec![rng.normal() + 0.5, rng.normal()]))
            .collect();
        let ab = fid(&a, &b).unwrap();
        let ba = fid(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9);
        assert!(ab >= 0.0);

        let w = vec![fv(vec![0.0]); 3];
        assert!(matches!(fid(&a, &w), Err(Error::Dimension(_))));
    }

    #[test]
    fn diversity_basics() {
        // All identical -> 0.
        let same = vec![fv(vec![1.0, 2.0]); 5];
        assert_eq!(diversity(&same, 0, 0).unwrap(), 0.0);

        // Two points at distance 3, all pairs -> 3.
        let two = vec![fv(vec![0.0, 0.0]), fv(vec![3.0, 0.0])];
        assert_eq!(diversity(&two, 0, 0).unwrap(), 3.0);
    }

    #[test]
    fn diversity_full_average_is_permutation_invariant() {
        let set: Vec<FeatureVector> = (0..6).map(|i| fv(vec![i as f64, -(i as f64)])).collect();
        let mut shuffled = set.clone();
        shuffled.reverse();
        shuffled.swap(1, 3);
        let a = diversity(&set, 0, 9).unwrap();
        let b = diversity(&shuffled, 0, 9).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
