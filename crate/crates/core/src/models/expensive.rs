use std::hint::black_box;

use super::Simulator;
use crate::filters::StateSpaceModel;
use crate::rng::RngStream;

/// Adds a fixed amount of busy work to every likelihood evaluation of the
/// wrapped model. Values are unchanged.
#[derive(Clone, Debug)]
pub struct SyntheticExpensiveModel<M> {
    pub inner: M,
    /// Spin iterations per evaluation.
    pub cost: u64,
}

impl<M> SyntheticExpensiveModel<M> {
    pub fn new(inner: M, cost: u64) -> Self {
        Self { inner, cost }
    }
}

fn spin(iterations: u64) {
    let mut acc = 0u64;
    for i in 0..iterations {
        acc = black_box(acc.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(i));
    }
    black_box(acc);
}

impl<M: StateSpaceModel> StateSpaceModel for SyntheticExpensiveModel<M> {
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
        spin(self.cost);
        self.inner.log_likelihood(state, obs, t)
    }
}

impl<M: Simulator> Simulator for SyntheticExpensiveModel<M> {
    fn sample_observation(&self, state: &[f64], t: usize, rng: &mut RngStream) -> Vec<f64> {
        self.inner.sample_observation(state, t, rng)
    }
    fn simulate_transition(&self, prev: &[f64], t: usize, rng: &mut RngStream, out: &mut [f64]) {
        self.inner.simulate_transition(prev, t, rng, out)
    }
}
