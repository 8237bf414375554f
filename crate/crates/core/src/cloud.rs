//! Weighted sample clouds, log-domain normalization, ESS diagnostics and the
//! importance-sampling estimators.

use crate::error::{Error, Result};

/// `ln(sum(exp(x)))`, subtracting the largest finite entry first.
/// Returns `-inf` when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Same as [`log_sum_exp`] over the entries selected by `idx`.
pub(crate) fn log_sum_exp_indexed(xs: &[f64], idx: &[usize]) -> f64 {
    let max = idx.iter().map(|&i| xs[i]).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = idx.iter().map(|&i| (xs[i] - max).exp()).sum();
    max + s.ln()
}

/// Normalize unnormalized log-weights into probabilities.
pub fn normalize_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    if log_w.is_empty() {
        return Err(Error::Empty);
    }
    let lse = log_sum_exp(log_w);
    if lse == f64::NEG_INFINITY {
        return Err(Error::AllWeightsZero);
    }
    Ok(log_w.iter().map(|&l| (l - lse).exp()).collect())
}

/// `1 / sum(w^2)` for normalized weights.
pub fn ess_inverse_sum_squares(w: &[f64]) -> f64 {
    1.0 / w.iter().map(|x| x * x).sum::<f64>()
}

/// `1 / max(w)` for normalized weights.
pub fn ess_inverse_max(w: &[f64]) -> f64 {
    1.0 / w.iter().copied().fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EssKind {
    #[default]
    InverseSumSquares,
    InverseMax,
}

impl EssKind {
    pub fn evaluate(self, w: &[f64]) -> f64 {
        match self {
            EssKind::InverseSumSquares => ess_inverse_sum_squares(w),
            EssKind::InverseMax => ess_inverse_max(w),
        }
    }
}

/// N samples in R^d with their unnormalized log-weights.
///
/// Samples are stored row-major in one buffer. Normalized weights are cached
/// at construction; a cloud whose log-weights are all `-inf` is still valid
/// (its evidence is zero) but has no normalized weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedCloud {
    dim: usize,
    samples: Vec<f64>,
    log_weights: Vec<f64>,
    normalized: Option<Vec<f64>>,
    log_total: f64,
}

impl WeightedCloud {
    pub fn new(dim: usize, samples: Vec<f64>, log_weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if log_weights.is_empty() {
            return Err(Error::Empty);
        }
        if samples.len() != dim * log_weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * log_weights.len(),
                found: samples.len(),
            });
        }
        if log_weights.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::InvalidConfig("log-weights must be finite or -inf".into()));
        }
        let log_total = log_sum_exp(&log_weights);
        let normalized = (log_total > f64::NEG_INFINITY)
            .then(|| log_weights.iter().map(|&l| (l - log_total).exp()).collect());
        Ok(Self { dim, samples, log_weights, normalized, log_total })
    }

    /// Equally weighted cloud (all log-weights zero).
    pub fn uniform(dim: usize, samples: Vec<f64>) -> Result<Self> {
        let n = if dim == 0 { 0 } else { samples.len() / dim };
        Self::new(dim, samples, vec![0.0; n])
    }

    pub fn from_scalars(xs: &[f64], log_weights: Vec<f64>) -> Result<Self> {
        Self::new(1, xs.to_vec(), log_weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        &self.samples[n * self.dim..(n + 1) * self.dim]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn iter_samples(&self) -> std::slice::ChunksExact<'_, f64> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn normalized(&self) -> Result<&[f64]> {
        self.normalized.as_deref().ok_or(Error::AllWeightsZero)
    }

    /// `ln sum_n w_n`.
    pub fn log_total_weight(&self) -> f64 {
        self.log_total
    }

    /// Per-dimension `(min, max)` over the samples.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for x in self.iter_samples() {
            for (bi, &xi) in b.iter_mut().zip(x) {
                bi.0 = bi.0.min(xi);
                bi.1 = bi.1.max(xi);
            }
        }
        b
    }

    pub fn ess(&self, kind: EssKind) -> Result<f64> {
        Ok(kind.evaluate(self.normalized()?))
    }
}

/// `sum_n wbar_n h(x_n)`.
pub fn is_estimate<F: Fn(&[f64]) -> f64>(cloud: &WeightedCloud, h: F) -> Result<f64> {
    let w = cloud.normalized()?;
    Ok(cloud.iter_samples().zip(w).map(|(x, &wn)| wn * h(x)).sum())
}

/// Componentwise weighted mean of the samples.
pub fn weighted_mean(cloud: &WeightedCloud) -> Result<Vec<f64>> {
    let w = cloud.normalized()?;
    let mut mean = vec![0.0; cloud.dim()];
    for (x, &wn) in cloud.iter_samples().zip(w) {
        for (m, &xi) in mean.iter_mut().zip(x) {
            *m += wn * xi;
        }
    }
    Ok(mean)
}

/// Marginal-likelihood estimate `(1/N) sum_n w_n`, optionally split into
/// per-region terms.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceEstimate {
    pub log_z: f64,
    pub log_terms: Option<Vec<f64>>,
}

impl EvidenceEstimate {
    pub fn z_hat(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn terms(&self) -> Option<Vec<f64>> {
        self.log_terms.as_ref().map(|t| t.iter().map(|l| l.exp()).collect())
    }
}

pub fn evidence_estimate(cloud: &WeightedCloud) -> EvidenceEstimate {
    let log_z = cloud.log_total_weight() - (cloud.len() as f64).ln();
    EvidenceEstimate { log_z, log_terms: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOL)
    }

    #[test]
    fn normalize_examples() {
        assert!(close(&normalize_weights(&[0.0; 4]).unwrap(), &[0.25; 4]));
        let w = normalize_weights(&[2f64.ln(), 6f64.ln()]).unwrap();
        assert!(close(&w, &[0.25, 0.75]));
        let w = normalize_weights(&[f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(w, vec![0.0, 1.0]);
        assert_eq!(normalize_weights(&[f64::NEG_INFINITY; 3]), Err(Error::AllWeightsZero));
        assert_eq!(normalize_weights(&[]), Err(Error::Empty));
    }

    #[test]
    fn normalize_survives_underflow() {
        let w = normalize_weights(&[-2000.0, -2000.0 + 3f64.ln()]).unwrap();
        assert!(close(&w, &[0.25, 0.75]));
    }

    #[test]
    fn is_estimate_examples() {
        let c = WeightedCloud::uniform(1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((is_estimate(&c, |x| x[0]).unwrap() - 2.5).abs() < TOL);
        let c = WeightedCloud::from_scalars(&[0.0, 4.0], vec![0.25f64.ln(), 0.75f64.ln()]).unwrap();
        assert!((is_estimate(&c, |x| x[0]).unwrap() - 3.0).abs() < TOL);
        let dead = WeightedCloud::from_scalars(&[1.0], vec![f64::NEG_INFINITY]).unwrap();
        assert_eq!(is_estimate(&dead, |x| x[0]), Err(Error::AllWeightsZero));
    }

    #[test]
    fn is_estimate_second_moment_of_standard_normal() {
        use crate::rng::RngStream;
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = RngStream::new(2024, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let c = WeightedCloud::uniform(1, xs.clone()).unwrap();
        let est = is_estimate(&c, |x| x[0] * x[0]).unwrap();
        let mean_sq = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x * x - mean_sq).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((est - 1.0).abs() <= 3.0 * se, "est {est} se {se}");
    }

    #[test]
    fn evidence_examples() {
        let c = WeightedCloud::uniform(1, vec![0.0; 4]).unwrap();
        assert!((evidence_estimate(&c).z_hat() - 1.0).abs() < TOL);
        let c = WeightedCloud::from_scalars(&[0.0, 1.0], vec![2f64.ln(), 6f64.ln()]).unwrap();
        assert!((evidence_estimate(&c).z_hat() - 4.0).abs() < TOL);
        let dead = WeightedCloud::from_scalars(&[0.0, 1.0], vec![f64::NEG_INFINITY; 2]).unwrap();
        assert_eq!(evidence_estimate(&dead).z_hat(), 0.0);
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess_inverse_sum_squares(&[0.25; 4]), 4.0);
        assert_eq!(ess_inverse_sum_squares(&[1.0, 0.0, 0.0]), 1.0);
        assert!((ess_inverse_sum_squares(&[0.5, 0.3, 0.2]) - 2.6316).abs() < 1e-4);
        assert_eq!(ess_inverse_max(&[0.25; 4]), 4.0);
        assert_eq!(ess_inverse_max(&[1.0, 0.0, 0.0]), 1.0);
        assert_eq!(ess_inverse_max(&[0.5, 0.3, 0.2]), 2.0);
    }

    #[test]
    fn cloud_rejects_bad_shapes() {
        assert!(matches!(
            WeightedCloud::new(2, vec![1.0, 2.0, 3.0], vec![0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(WeightedCloud::new(1, vec![], vec![]), Err(Error::Empty));
    }

    proptest! {
        #[test]
        fn normalization_sums_to_one(lw in prop::collection::vec(-50.0f64..50.0, 1..200)) {
            let w = normalize_weights(&lw).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= TOL);
        }

        #[test]
        fn normalization_is_shift_invariant(
            lw in prop::collection::vec(-30.0f64..30.0, 1..100),
            c in -500.0f64..500.0,
        ) {
            let a = normalize_weights(&lw).unwrap();
            let shifted: Vec<f64> = lw.iter().map(|l| l + c).collect();
            let b = normalize_weights(&shifted).unwrap();
            prop_assert!(close(&a, &b));
        }

        #[test]
        fn ess_within_bounds(lw in prop::collection::vec(-20.0f64..20.0, 1..100)) {
            let w = normalize_weights(&lw).unwrap();
            let n = w.len() as f64;
            for e in [ess_inverse_sum_squares(&w), ess_inverse_max(&w)] {
                prop_assert!(e >= 1.0 - TOL && e <= n * (1.0 + TOL));
            }
        }

        #[test]
        fn is_estimate_invariant_to_rescaling(
            pts in prop::collection::vec((-10.0f64..10.0, -5.0f64..5.0), 1..60),
            c in -40.0f64..40.0,
        ) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let lw: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let a = is_estimate(&WeightedCloud::from_scalars(&xs, lw.clone()).unwrap(), |x| x[0]).unwrap();
            let lw2: Vec<f64> = lw.iter().map(|l| l + c).collect();
            let b = is_estimate(&WeightedCloud::from_scalars(&xs, lw2).unwrap(), |x| x[0]).unwrap();
            prop_assert!((a - b).abs() <= TOL * (1.0 + a.abs()));
        }
    }
}
