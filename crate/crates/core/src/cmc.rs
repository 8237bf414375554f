//! Compressed Monte Carlo: replace a weighted cloud of N samples by M' <= N
//! summary particles, one per non-empty region of a partition.
//!
//! Summary weights are the region masses `â_m = sum_{i in J_m} wbar_i`,
//! accumulated in log domain, and the unnormalized weights are the region
//! evidences `a_m = Ẑ_m = (1/N) sum_{i in J_m} w_i`, so `sum_m a_m` equals
//! the evidence estimate of the source cloud. Note that this is a plain sum:
//! an arithmetic mean `(1/M) sum_m a_m` would only match after rescaling.
//!
//! Regions without mass (empty, or containing only zero-weight samples) are
//! dropped, so every retained region has `â_m > 0`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{log_sum_exp_indexed, WeightedCloud};
use crate::error::{Error, Result};
use crate::partition::{IndexSets, Partition};
use crate::rng::RngStream;

/// How summary particles are chosen inside each region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    /// One member drawn with probabilities proportional to its weight.
    Stochastic,
    /// The weighted mean of the members.
    #[default]
    WeightedMean,
    /// The weighted mean of `h` over the members (scalar, lives in h-space).
    FunctionSpecific,
}

impl Selection {
    pub fn label(self) -> &'static str {
        match self {
            Selection::Stochastic => "stoch",
            Selection::WeightedMean => "mean",
            Selection::FunctionSpecific => "function",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stoch" | "stochastic" => Some(Selection::Stochastic),
            "mean" | "det" | "deterministic" => Some(Selection::WeightedMean),
            _ => None,
        }
    }
}

/// Summary weights of the retained regions.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionWeights {
    /// Index of each retained region in the source partition.
    pub regions: Vec<usize>,
    /// `â_m`, sums to one.
    pub normalized: Vec<f64>,
    /// `ln a_m = ln Ẑ_m`.
    pub log_evidence: Vec<f64>,
}

impl RegionWeights {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// `a_m = Ẑ_m` in linear scale.
    pub fn evidence(&self) -> Vec<f64> {
        self.log_evidence.iter().map(|l| l.exp()).collect()
    }
}

pub fn summary_weights(cloud: &WeightedCloud, idx: &IndexSets) -> Result<RegionWeights> {
    if idx.total() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), found: idx.total() });
    }
    let log_total = cloud.log_total_weight();
    if log_total == f64::NEG_INFINITY {
        return Err(Error::AllWeightsZero);
    }
    let log_n = (cloud.len() as f64).ln();
    let lw = cloud.log_weights();
    let mut out = RegionWeights { regions: Vec::new(), normalized: Vec::new(), log_evidence: Vec::new() };
    for (m, set) in idx.iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let lse = log_sum_exp_indexed(lw, set);
        if lse == f64::NEG_INFINITY {
            continue;
        }
        out.regions.push(m);
        out.normalized.push((lse - log_total).exp());
        out.log_evidence.push(lse - log_n);
    }
    Ok(out)
}

/// Within-region normalized weights `wbar_{m,i} = wbar_i / â_m`, together
/// with the region weights they were derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialWeights {
    pub summary: RegionWeights,
    pub members: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

impl PartialWeights {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn partial_weights(cloud: &WeightedCloud, idx: &IndexSets) -> Result<PartialWeights> {
    let summary = summary_weights(cloud, idx)?;
    let lw = cloud.log_weights();
    let mut members = Vec::with_capacity(summary.len());
    let mut weights = Vec::with_capacity(summary.len());
    for &m in &summary.regions {
        let set = idx.get(m);
        let lse = log_sum_exp_indexed(lw, set);
        members.push(set.to_vec());
        weights.push(set.iter().map(|&i| (lw[i] - lse).exp()).collect());
    }
    Ok(PartialWeights { summary, members, weights })
}

/// M' weighted summary particles.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryCloud {
    dim: usize,
    particles: Vec<f64>,
    weights: Vec<f64>,
    log_evidence: Vec<f64>,
    counts: Vec<usize>,
    covariances: Option<Vec<DMatrix<f64>>>,
    selection: Selection,
}

impl SummaryCloud {
    fn from_parts(dim: usize, particles: Vec<f64>, pw: &PartialWeights, selection: Selection) -> Self {
        Self {
            dim,
            particles,
            weights: pw.summary.normalized.clone(),
            log_evidence: pw.summary.log_evidence.clone(),
            counts: pw.members.iter().map(Vec::len).collect(),
            covariances: None,
            selection,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn particle(&self, m: usize) -> &[f64] {
        &self.particles[m * self.dim..(m + 1) * self.dim]
    }

    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn iter_particles(&self) -> std::slice::ChunksExact<'_, f64> {
        self.particles.chunks_exact(self.dim)
    }

    /// `â_m` (or whatever normalized weights were installed by [`Self::reweight`]).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_evidence(&self) -> &[f64] {
        &self.log_evidence
    }

    /// `sum_m Ẑ_m`.
    pub fn evidence(&self) -> f64 {
        self.log_evidence.iter().map(|l| l.exp()).sum()
    }

    /// Number of source samples behind each summary particle.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn selection(&self) -> Selection {
        self.selection
    }

    pub fn covariances(&self) -> Option<&[DMatrix<f64>]> {
        self.covariances.as_deref()
    }

    pub fn with_covariances(mut self, covs: Vec<DMatrix<f64>>) -> Result<Self> {
        if covs.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: covs.len() });
        }
        self.covariances = Some(covs);
        Ok(self)
    }

    /// Replace the normalized weights, e.g. by `â_m p(y|s_m)` normalized.
    pub fn reweight(&mut self, normalized: Vec<f64>) -> Result<()> {
        if normalized.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: normalized.len() });
        }
        self.weights = normalized;
        Ok(())
    }

    /// The summary as a weighted cloud with log-weights `ln a_m`.
    pub fn to_cloud(&self) -> Result<WeightedCloud> {
        WeightedCloud::new(self.dim, self.particles.clone(), self.log_evidence.clone())
    }
}

pub fn select_stochastic(cloud: &WeightedCloud, pw: &PartialWeights, rng: &mut RngStream) -> SummaryCloud {
    let d = cloud.dim();
    let mut particles = Vec::with_capacity(pw.len() * d);
    for (members, weights) in pw.members.iter().zip(&pw.weights) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = *members.last().expect("retained regions are non-empty");
        for (&i, &w) in members.iter().zip(weights) {
            acc += w;
            if u < acc && w > 0.0 {
                pick = i;
                break;
            }
        }
        particles.extend_from_slice(cloud.sample(pick));
    }
    SummaryCloud::from_parts(d, particles, pw, Selection::Stochastic)
}

fn region_means(cloud: &WeightedCloud, pw: &PartialWeights) -> Vec<f64> {
    let d = cloud.dim();
    let mut particles = vec![0.0; pw.len() * d];
    for ((members, weights), s) in pw.members.iter().zip(&pw.weights).zip(particles.chunks_exact_mut(d)) {
        for (&i, &w) in members.iter().zip(weights) {
            for (sj, &xj) in s.iter_mut().zip(cloud.sample(i)) {
                *sj += w * xj;
            }
        }
    }
    particles
}

pub fn select_weighted_mean(cloud: &WeightedCloud, pw: &PartialWeights) -> SummaryCloud {
    SummaryCloud::from_parts(cloud.dim(), region_means(cloud, pw), pw, Selection::WeightedMean)
}

/// Per-region partial estimates `Î_m(h) = sum_{i in J_m} wbar_{m,i} h(x_i)`.
pub fn partial_estimates<F: Fn(&[f64]) -> f64>(cloud: &WeightedCloud, pw: &PartialWeights, h: F) -> Vec<f64> {
    pw.members
        .iter()
        .zip(&pw.weights)
        .map(|(members, weights)| members.iter().zip(weights).map(|(&i, &w)| w * h(cloud.sample(i))).sum())
        .collect()
}

pub fn select_function_specific<F: Fn(&[f64]) -> f64>(cloud: &WeightedCloud, pw: &PartialWeights, h: F) -> SummaryCloud {
    SummaryCloud::from_parts(1, partial_estimates(cloud, pw, h), pw, Selection::FunctionSpecific)
}

/// `Σ_m = sum_j wbar_{m,j} (x_j - s_m)(x_j - s_m)^T + eps I`, with `s_m` the
/// region's weighted mean.
pub fn region_covariances(cloud: &WeightedCloud, pw: &PartialWeights, eps: f64) -> Vec<DMatrix<f64>> {
    let d = cloud.dim();
    let means = region_means(cloud, pw);
    pw.members
        .iter()
        .zip(&pw.weights)
        .zip(means.chunks_exact(d))
        .map(|((members, weights), s)| {
            let mut cov = DMatrix::<f64>::zeros(d, d);
            for (&i, &w) in members.iter().zip(weights) {
                let x = cloud.sample(i);
                for a in 0..d {
                    let da = x[a] - s[a];
                    for b in 0..=a {
                        cov[(a, b)] += w * da * (x[b] - s[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    cov[(b, a)] = cov[(a, b)];
                }
                cov[(a, a)] += eps;
            }
            cov
        })
        .collect()
}

/// `sum_m â_m h(s_m)` for a spatial summary.
pub fn cmc_estimate<F: Fn(&[f64]) -> f64>(sc: &SummaryCloud, h: F) -> Result<f64> {
    if sc.selection == Selection::FunctionSpecific {
        return Err(Error::ProvenanceMismatch);
    }
    Ok(sc.iter_particles().zip(&sc.weights).map(|(s, &a)| a * h(s)).sum())
}

/// `sum_m â_m s_m` with the identity map; valid for scalar summaries, which
/// includes every function-specific summary.
pub fn cmc_estimate_identity(sc: &SummaryCloud) -> Result<f64> {
    if sc.dim != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: sc.dim });
    }
    Ok(sc.particles.iter().zip(&sc.weights).map(|(s, a)| a * s).sum())
}

/// Partition, weigh and select in one go. Function-specific selection needs
/// an integrand and is not available here.
pub fn compress(
    cloud: &WeightedCloud,
    partition: &Partition,
    selection: Selection,
    rng: &mut RngStream,
) -> Result<SummaryCloud> {
    let idx = partition.assign(cloud)?;
    let pw = partial_weights(cloud, &idx)?;
    match selection {
        Selection::Stochastic => Ok(select_stochastic(cloud, &pw, rng)),
        Selection::WeightedMean => Ok(select_weighted_mean(cloud, &pw)),
        Selection::FunctionSpecific => {
            Err(Error::InvalidConfig("function-specific selection requires an integrand".into()))
        }
    }
}
