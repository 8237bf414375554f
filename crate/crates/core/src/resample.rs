//! Resampling kernels: categorical draws over summary particles, optionally
//! smoothed by per-region Gaussian kernels.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cmc::{Selection, SummaryCloud};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResampleMode {
    #[default]
    Multinomial,
    Regularized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub mode: ResampleMode,
    /// Diagonal loading added to region covariances in regularized mode.
    pub eps: f64,
    /// Use systematic instead of multinomial index draws.
    pub systematic: bool,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        Self { mode: ResampleMode::Multinomial, eps: 1e-6, systematic: false }
    }
}

impl ResamplePlan {
    pub fn validate(&self) -> Result<()> {
        if self.mode == ResampleMode::Regularized && !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("regularized resampling needs eps > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// `n` ancestor indices drawn with probabilities proportional to `weights`.
pub fn resample_indices(weights: &[f64], n: usize, systematic: bool, rng: &mut RngStream) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::Empty);
    }
    if systematic {
        return systematic_indices(weights, n, rng);
    }
    let dist = WeightedIndex::new(weights).map_err(|_| Error::AllWeightsZero)?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

fn systematic_indices(weights: &[f64], n: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut acc = weights[0];
    let mut j = 0;
    for _ in 0..n {
        while u >= acc && j + 1 < weights.len() {
            j += 1;
            acc += weights[j];
        }
        out.push(j);
        u += step;
    }
    Ok(out)
}

/// Draw `n` states among the summary particles according to their weights.
pub fn resample_multinomial(sc: &SummaryCloud, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    resample_with(sc, n, false, rng)
}

pub(crate) fn resample_with(sc: &SummaryCloud, n: usize, systematic: bool, rng: &mut RngStream) -> Result<Vec<f64>> {
    if sc.selection() == Selection::FunctionSpecific {
        return Err(Error::ProvenanceMismatch);
    }
    let idx = resample_indices(sc.weights(), n, systematic, rng)?;
    let mut out = Vec::with_capacity(n * sc.dim());
    for m in idx {
        out.extend_from_slice(sc.particle(m));
    }
    Ok(out)
}

/// Draw `n` states from the mixture `sum_m w_m N(s_m, Σ_m)`.
pub fn resample_regularized(sc: &SummaryCloud, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    regularized_with(sc, n, false, rng)
}

fn regularized_with(sc: &SummaryCloud, n: usize, systematic: bool, rng: &mut RngStream) -> Result<Vec<f64>> {
    if sc.selection() == Selection::FunctionSpecific {
        return Err(Error::ProvenanceMismatch);
    }
    let covs = sc
        .covariances()
        .ok_or_else(|| Error::InvalidConfig("regularized resampling needs region covariances".into()))?;
    let factors = covs
        .iter()
        .enumerate()
        .map(|(m, c)| c.clone().cholesky().map(|ch| ch.l()).ok_or(Error::CovarianceNotSpd { region: m }))
        .collect::<Result<Vec<DMatrix<f64>>>>()?;
    let d = sc.dim();
    let idx = resample_indices(sc.weights(), n, systematic, rng)?;
    let mut out = Vec::with_capacity(n * d);
    for m in idx {
        let z = DVector::<f64>::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = &factors[m] * z;
        out.extend(sc.particle(m).iter().zip(x.iter()).map(|(s, dx)| s + dx));
    }
    Ok(out)
}

/// Dispatch on a plan.
pub fn resample(sc: &SummaryCloud, n: usize, plan: &ResamplePlan, rng: &mut RngStream) -> Result<Vec<f64>> {
    plan.validate()?;
    match plan.mode {
        ResampleMode::Multinomial => resample_with(sc, n, plan.systematic, rng),
        ResampleMode::Regularized => regularized_with(sc, n, plan.systematic, rng),
    }
}
