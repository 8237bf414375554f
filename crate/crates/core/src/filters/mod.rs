//! Particle filters: the standard bootstrap filter with ESS-triggered
//! resampling, the compressed bootstrap filter and the generic compressed
//! filter, plus the adaptive choice of the number of summary particles.

mod bpf;
mod compressed;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cloud::{weighted_mean, EssKind, WeightedCloud};
use crate::cmc::{Selection, SummaryCloud};
use crate::error::{Error, Result};
use crate::partition::PartitionRule;
use crate::resample::ResamplePlan;
use crate::rng::{purpose, RngStream};

pub use bpf::run_bpf;
pub use compressed::{run_cbpf, run_generic_cpf};

/// A state-space model `x_t ~ p(x_t | x_{t-1})`, `y_t ~ p(y_t | x_t)`.
///
/// Implementations are shared read-only across concurrent runs.
pub trait StateSpaceModel: Sync {
    fn dim(&self) -> usize;
    /// Length of each observation vector, when the model fixes one.
    fn obs_dim(&self) -> Option<usize> {
        None
    }
    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]);
    fn sample_transition(&self, prev: &[f64], t: usize, rng: &mut RngStream, out: &mut [f64]);
    /// `ln p(y_t | x_t)`; may be `-inf`.
    fn log_likelihood(&self, state: &[f64], obs: &[f64], t: usize) -> f64;
}

impl<M: StateSpaceModel + ?Sized> StateSpaceModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn obs_dim(&self) -> Option<usize> {
        (**self).obs_dim()
    }
    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        (**self).sample_initial(rng, out)
    }
    fn sample_transition(&self, prev: &[f64], t: usize, rng: &mut RngStream, out: &mut [f64]) {
        (**self).sample_transition(prev, t, rng, out)
    }
    fn log_likelihood(&self, state: &[f64], obs: &[f64], t: usize) -> f64 {
        (**self).log_likelihood(state, obs, t)
    }
}

/// Wraps a model and counts likelihood evaluations independently of the
/// filter's own bookkeeping.
#[derive(Debug)]
pub struct CountingModel<M> {
    inner: M,
    calls: AtomicU64,
}

impl<M> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }

    pub fn count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed)
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: StateSpaceModel> StateSpaceModel for CountingModel<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn obs_dim(&self) -> Option<usize> {
        self.inner.obs_dim()
    }
    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        self.inner.sample_initial(rng, out)
    }
    fn sample_transition(&self, prev: &[f64], t: usize, rng: &mut RngStream, out: &mut [f64]) {
        self.inner.sample_transition(prev, t, rng, out)
    }
    fn log_likelihood(&self, state: &[f64], obs: &[f64], t: usize) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.log_likelihood(state, obs, t)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[default]
    Bpf,
    Cbpf,
    GenericCpf,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Bpf => "BPF",
            Algorithm::Cbpf => "CBPF",
            Algorithm::GenericCpf => "GenericCPF",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveM {
    pub enabled: bool,
    pub gamma: f64,
    pub m_min: usize,
}

impl Default for AdaptiveM {
    fn default() -> Self {
        Self { enabled: false, gamma: 1.0, m_min: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub eta: f64,
    pub ess: EssKind,
    pub partition: PartitionRule,
    pub selection: Selection,
    pub resample: ResamplePlan,
    pub adaptive: AdaptiveM,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Bpf,
            n: 1000,
            m: 1000,
            eta: 0.5,
            ess: EssKind::InverseSumSquares,
            partition: PartitionRule::UniformGrid,
            selection: Selection::WeightedMean,
            resample: ResamplePlan::default(),
            adaptive: AdaptiveM::default(),
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn bpf(n: usize, eta: f64) -> Self {
        Self { algorithm: Algorithm::Bpf, n, m: n, eta, ..Self::default() }
    }

    pub fn cbpf(n: usize, m: usize) -> Self {
        Self { algorithm: Algorithm::Cbpf, n, m, eta: 1.0, ..Self::default() }
    }

    pub fn generic_cpf(n: usize, m: usize, eta: f64) -> Self {
        Self { algorithm: Algorithm::GenericCpf, n, m, eta, ..Self::default() }
    }

    pub fn with_partition(mut self, rule: PartitionRule) -> Self {
        self.partition = rule;
        self
    }

    pub fn with_selection(mut self, selection: Selection) -> Self {
        self.selection = selection;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("N must be positive".into()));
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::InvalidConfig(format!("M = {} must lie in 1..=N = {}", self.m, self.n)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidConfig(format!("eta = {} outside [0, 1]", self.eta)));
        }
        if self.selection == Selection::FunctionSpecific {
            return Err(Error::InvalidConfig("filters need spatial summary particles".into()));
        }
        self.resample.validate()?;
        if self.adaptive.enabled {
            if self.algorithm != Algorithm::Cbpf {
                return Err(Error::InvalidConfig("adaptive M is only available for CBPF".into()));
            }
            if !(self.adaptive.gamma > 0.0) || self.adaptive.m_min == 0 {
                return Err(Error::InvalidConfig("adaptive M needs gamma > 0 and M_min >= 1".into()));
            }
        }
        if self.algorithm == Algorithm::GenericCpf && self.n % self.m != 0 {
            return Err(Error::DivisibilityViolation { n: self.n, m: self.m });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Weighted posterior mean before resampling.
    pub estimate: Vec<f64>,
    pub ess: f64,
    pub resampled: bool,
    /// Running `ln Ẑ` after this step.
    pub log_evidence: f64,
    pub evaluations: usize,
    /// Number of particles or summary particles that were weighted.
    pub m: usize,
    /// All weights vanished and were reset to uniform.
    pub reset: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilterTrace {
    pub algorithm: Algorithm,
    pub steps: Vec<StepRecord>,
    pub log_z: f64,
    pub total_evaluations: u64,
    pub wall_time: Duration,
}

impl FilterTrace {
    pub fn estimates(&self) -> impl Iterator<Item = &[f64]> {
        self.steps.iter().map(|s| s.estimate.as_slice())
    }

    /// Root mean squared error over every step and state component.
    /// `truth[t]` is the state at step `t + 1`.
    pub fn rmse(&self, truth: &[Vec<f64>]) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (s, x) in self.steps.iter().zip(truth) {
            for (a, b) in s.estimate.iter().zip(x) {
                sum += (a - b) * (a - b);
                count += 1;
            }
        }
        (sum / count.max(1) as f64).sqrt()
    }

    /// Equality of everything except wall time.
    pub fn same_path(&self, other: &FilterTrace) -> bool {
        self.algorithm == other.algorithm
            && self.steps == other.steps
            && self.log_z.to_bits() == other.log_z.to_bits()
            && self.total_evaluations == other.total_evaluations
    }

    pub fn resets(&self) -> usize {
        self.steps.iter().filter(|s| s.reset).count()
    }
}

/// `min(N, max(floor(gamma * floor(ess)), M_min))`.
pub fn adaptive_m(ess: f64, gamma: f64, m_min: usize, n: usize) -> usize {
    let raw = (gamma * ess.floor()).floor();
    let m = if raw.is_finite() && raw > 0.0 { raw as usize } else { 0 };
    m.max(m_min).min(n)
}

pub fn posterior_mean(cloud: &WeightedCloud) -> Result<Vec<f64>> {
    weighted_mean(cloud)
}

/// Weighted mean of summary particles under their current weights.
pub fn summary_mean(sc: &SummaryCloud) -> Result<Vec<f64>> {
    let total: f64 = sc.weights().iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllWeightsZero);
    }
    let mut out = vec![0.0; sc.dim()];
    for (s, w) in sc.iter_particles().zip(sc.weights()) {
        for (o, x) in out.iter_mut().zip(s) {
            *o += w / total * x;
        }
    }
    Ok(out)
}

pub fn run_filter<M: StateSpaceModel>(model: &M, ys: &[Vec<f64>], cfg: &FilterConfig) -> Result<FilterTrace> {
    run_filter_with(model, ys, cfg, &RngStream::new(cfg.seed, 0))
}

/// Run with an explicit root stream, e.g. one derived per replication.
pub fn run_filter_with<M: StateSpaceModel>(
    model: &M,
    ys: &[Vec<f64>],
    cfg: &FilterConfig,
    rng: &RngStream,
) -> Result<FilterTrace> {
    match cfg.algorithm {
        Algorithm::Bpf => run_bpf(model, ys, cfg, rng),
        Algorithm::Cbpf => run_cbpf(model, ys, cfg, rng),
        Algorithm::GenericCpf => run_generic_cpf(model, ys, cfg, rng),
    }
}

fn initial_particles<M: StateSpaceModel>(model: &M, n: usize, rng: &RngStream) -> Vec<f64> {
    let d = model.dim();
    let mut r = rng.step(0, purpose::PROPAGATE);
    let mut out = vec![0.0; n * d];
    for x in out.chunks_exact_mut(d) {
        model.sample_initial(&mut r, x);
    }
    out
}

fn propagate<M: StateSpaceModel>(model: &M, prev: &[f64], t: usize, rng: &RngStream) -> Vec<f64> {
    let d = model.dim();
    let mut r = rng.step(t, purpose::PROPAGATE);
    let mut out = vec![0.0; prev.len()];
    for (x, p) in out.chunks_exact_mut(d).zip(prev.chunks_exact(d)) {
        model.sample_transition(p, t, &mut r, x);
    }
    out
}

fn mean_of(points: &[f64], d: usize, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (x, &wi) in points.chunks_exact(d).zip(w) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o += wi * xi;
        }
    }
    out
}

fn check_inputs<M: StateSpaceModel>(model: &M, ys: &[Vec<f64>], cfg: &FilterConfig, expected: Algorithm) -> Result<()> {
    if cfg.algorithm != expected {
        return Err(Error::InvalidConfig(format!(
            "configuration is for {}, not {}",
            cfg.algorithm.label(),
            expected.label()
        )));
    }
    if model.dim() == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    if let Some(r) = model.obs_dim() {
        if let Some(y) = ys.iter().find(|y| y.len() != r) {
            return Err(Error::DimensionMismatch { expected: r, found: y.len() });
        }
    }
    cfg.validate()
}
