use rand::Rng;
use rand_distr::StandardNormal;

use super::Simulator;
use crate::filters::StateSpaceModel;
use crate::rng::RngStream;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

fn normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

fn gauss_logpdf(r: f64, var: f64) -> f64 {
    -HALF_LN_TAU - 0.5 * var.ln() - 0.5 * r * r / var
}

/// `x_t = |x_{t-1}| + v_t`, `y_t = ln(x_t^2) + u_t`, unit noise variances,
/// `x_0 ~ N(0, 1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct AbsLogModel;

impl AbsLogModel {
    pub const HORIZON: usize = 100;
    /// Smallest `|x|` used inside the logarithm.
    pub const X_FLOOR: f64 = 1e-12;
}

impl StateSpaceModel for AbsLogModel {
    fn dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> Option<usize> {
        Some(1)
    }
    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = normal(rng);
    }
    fn sample_transition(&self, prev: &[f64], _t: usize, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = prev[0].abs() + normal(rng);
    }
    fn log_likelihood(&self, state: &[f64], obs: &[f64], _t: usize) -> f64 {
        let x = state[0].abs().max(Self::X_FLOOR);
        gauss_logpdf(obs[0] - 2.0 * x.ln(), 1.0)
    }
}

impl Simulator for AbsLogModel {
    fn sample_observation(&self, state: &[f64], _t: usize, rng: &mut RngStream) -> Vec<f64> {
        let x = state[0].abs().max(Self::X_FLOOR);
        vec![2.0 * x.ln() + normal(rng)]
    }
}

/// `x_t = x/2 + 25x/(1+x^2) + cos(1.2t) + v_t` with `v ~ N(0, 10)`,
/// `y_t = x_t^2/20 + u_t` with `u ~ N(0, 1)`, `x_0 ~ N(0, 10)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct GrowthModel;

impl GrowthModel {
    pub const HORIZON: usize = 100;
    pub const TRANSITION_VAR: f64 = 10.0;
    pub const INITIAL_VAR: f64 = 10.0;

    pub fn drift(x: f64, t: usize) -> f64 {
        0.5 * x + 25.0 * x / (1.0 + x * x) + (1.2 * t as f64).cos()
    }
}

impl StateSpaceModel for GrowthModel {
    fn dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> Option<usize> {
        Some(1)
    }
    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = Self::INITIAL_VAR.sqrt() * normal(rng);
    }
    fn sample_transition(&self, prev: &[f64], t: usize, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = Self::drift(prev[0], t) + Self::TRANSITION_VAR.sqrt() * normal(rng);
    }
    fn log_likelihood(&self, state: &[f64], obs: &[f64], _t: usize) -> f64 {
        gauss_logpdf(obs[0] - state[0] * state[0] / 20.0, 1.0)
    }
}

impl Simulator for GrowthModel {
    fn sample_observation(&self, state: &[f64], _t: usize, rng: &mut RngStream) -> Vec<f64> {
        vec![state[0] * state[0] / 20.0 + normal(rng)]
    }
}

/// `x_t = a x_{t-1} + N(0, q)`, `y_t = x_t + N(0, r)`, `x_0 ~ N(0, p0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearGaussianModel {
    pub a: f64,
    pub q: f64,
    pub r: f64,
    pub p0: f64,
}

impl Default for LinearGaussianModel {
    fn default() -> Self {
        Self { a: 0.9, q: 1.0, r: 1.0, p0: 1.0 }
    }
}

impl StateSpaceModel for LinearGaussianModel {
    fn dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> Option<usize> {
        Some(1)
    }
    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = self.p0.sqrt() * normal(rng);
    }
    fn sample_transition(&self, prev: &[f64], _t: usize, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = self.a * prev[0] + self.q.sqrt() * normal(rng);
    }
    fn log_likelihood(&self, state: &[f64], obs: &[f64], _t: usize) -> f64 {
        gauss_logpdf(obs[0] - state[0], self.r)
    }
}

impl Simulator for LinearGaussianModel {
    fn sample_observation(&self, state: &[f64], _t: usize, rng: &mut RngStream) -> Vec<f64> {
        vec![state[0] + self.r.sqrt() * normal(rng)]
    }
}
