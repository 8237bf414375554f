//! Radial velocity of a star with S independent orbiting objects.
//!
//! State layout: `[V0, K_1, ω_1, e_1, P_1, τ_1, ..., K_S, ω_S, e_S, P_S, τ_S]`.
//! Static parameters follow random walks so a filter can track them; any
//! state outside the constraint box has zero likelihood.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use super::Simulator;
use crate::error::{Error, Result};
use crate::filters::StateSpaceModel;
use crate::rng::RngStream;

pub const OBSERVATIONS_PER_STEP: usize = 5;
pub const NOISE_VAR: f64 = 1.0;
pub const OMEGA_STEP_VAR: f64 = 0.5;
pub const PARAM_STEP_VAR: f64 = 0.1;
pub const V0_RANGE: (f64, f64) = (-20.0, 20.0);
pub const K_RANGE: (f64, f64) = (0.0, 50.0);
pub const E_RANGE: (f64, f64) = (0.0, 1.0);
pub const P_RANGE: (f64, f64) = (0.0, 365.0);
pub const OMEGA_RANGE: (f64, f64) = (0.0, TAU);

pub const SOLVER_TOLERANCE: f64 = 1e-14;
pub const SOLVER_MAX_ITERATIONS: usize = 100;
/// Eccentricities in `[1 - ECC_CLAMP, 1)` are clamped to `1 - ECC_CLAMP`.
pub const ECC_CLAMP: f64 = 1e-9;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

/// `(K, ω, e, P, τ)` of one object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orbit {
    pub k: f64,
    pub omega: f64,
    pub e: f64,
    pub period: f64,
    pub tau: f64,
}

impl Orbit {
    fn from_slice(s: &[f64]) -> Self {
        Orbit { k: s[0], omega: s[1], e: s[2], period: s[3], tau: s[4] }
    }

    fn in_box(&self) -> bool {
        within(self.k, K_RANGE)
            && within(self.omega, OMEGA_RANGE)
            && within(self.e, E_RANGE)
            && self.period > 0.0
            && within(self.period, P_RANGE)
            && within(self.tau, (0.0, self.period))
    }
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

/// `(2π / P)(t - τ)`.
pub fn kepler_mean_anomaly(t: f64, period: f64, tau: f64) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::NonpositivePeriod(period));
    }
    Ok(TAU / period * (t - tau))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeplerSolution {
    pub eccentric_anomaly: f64,
    pub iterations: usize,
    /// The eccentricity was pulled back from the edge of `[0, 1)`.
    pub clamped: bool,
    /// Newton did not converge and bisection produced the root.
    pub bisected: bool,
}

/// Solve `M = E - e sin E` for `E` in `[0, 2π)`.
pub fn kepler_solve(mean_anomaly: f64, e: f64) -> Result<f64> {
    kepler_solve_detailed(mean_anomaly, e).map(|s| s.eccentric_anomaly)
}

pub fn kepler_solve_detailed(mean_anomaly: f64, e: f64) -> Result<KeplerSolution> {
    if !(e >= 0.0) || e >= 1.0 {
        return Err(Error::EccentricityOutOfRange(e));
    }
    let clamped = e > 1.0 - ECC_CLAMP;
    let e = e.min(1.0 - ECC_CLAMP);
    let m = mean_anomaly.rem_euclid(TAU);
    let f = |x: f64| x - e * x.sin() - m;

    let mut x = m;
    for it in 0..SOLVER_MAX_ITERATIONS {
        let r = f(x);
        if r.abs() <= SOLVER_TOLERANCE {
            return Ok(KeplerSolution { eccentric_anomaly: x, iterations: it, clamped, bisected: false });
        }
        let step = (r / (1.0 - e * x.cos())).clamp(-1.0, 1.0);
        x = (x - step).clamp(0.0, TAU);
    }
    // f is increasing with f(0) <= 0 <= f(2π).
    let (mut lo, mut hi) = (0.0, TAU);
    let mut iterations = SOLVER_MAX_ITERATIONS;
    while hi - lo > 1e-15 && iterations < SOLVER_MAX_ITERATIONS + 200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(KeplerSolution { eccentric_anomaly: 0.5 * (lo + hi), iterations, clamped, bisected: true })
}

/// `u = 2 atan2(sqrt(1+e) sin(E/2), sqrt(1-e) cos(E/2))`, in `[0, 2π)`.
pub fn true_anomaly(ecc_anomaly: f64, e: f64) -> f64 {
    let half = 0.5 * ecc_anomaly;
    let u = 2.0 * ((1.0 + e).sqrt() * half.sin()).atan2((1.0 - e).sqrt() * half.cos());
    let u = u.rem_euclid(TAU);
    if u >= TAU {
        0.0
    } else {
        u
    }
}

/// Whether every component lies inside the constraint box.
pub fn in_constraint_box(state: &[f64]) -> bool {
    if state.is_empty() || (state.len() - 1) % 5 != 0 {
        return false;
    }
    within(state[0], V0_RANGE) && state[1..].chunks_exact(5).all(|o| Orbit::from_slice(o).in_box())
}

fn orbit_velocity(o: &Orbit, t: f64) -> Result<f64> {
    let m = kepler_mean_anomaly(t, o.period, o.tau)?;
    let ecc = kepler_solve(m, o.e)?;
    let u = true_anomaly(ecc, o.e);
    Ok(o.k * ((u + o.omega).cos() + o.e * o.omega.cos()))
}

/// Noise-free radial velocity `V0 + sum_i K_i [cos(u_i + ω_i) + e_i cos ω_i]`.
pub fn radial_velocity(state: &[f64], t: f64) -> Result<f64> {
    if !in_constraint_box(state) {
        return Err(Error::ConstraintViolation);
    }
    let mut v = state[0];
    for o in state[1..].chunks_exact(5) {
        v += orbit_velocity(&Orbit::from_slice(o), t)?;
    }
    Ok(v)
}

/// Sum of Gaussian log-densities of the observations at time `t`, or `-inf`
/// when the state violates a constraint or the solver rejects it.
pub fn kepler_log_likelihood(state: &[f64], ys: &[f64], t: f64) -> f64 {
    match radial_velocity(state, t) {
        Ok(v) => ys
            .iter()
            .map(|y| -HALF_LN_TAU - 0.5 * NOISE_VAR.ln() - 0.5 * (y - v) * (y - v) / NOISE_VAR)
            .sum(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Random-walk step: `N(0, 0.5)` on ω, `N(0, 0.1)` on everything else.
pub fn kepler_transition(state: &[f64], rng: &mut RngStream, out: &mut [f64]) {
    let omega_sd = OMEGA_STEP_VAR.sqrt();
    let param_sd = PARAM_STEP_VAR.sqrt();
    for (j, (o, &x)) in out.iter_mut().zip(state).enumerate() {
        let sd = if j > 0 && (j - 1) % 5 == 1 { omega_sd } else { param_sd };
        *o = x + sd * rng.sample::<f64, _>(StandardNormal);
    }
}

/// Uniform draw over the constraint box, with `τ_i ~ U[0, P_i]`.
pub fn kepler_prior_sample(objects: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut u = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let mut x = Vec::with_capacity(1 + 5 * objects);
    x.push(u(V0_RANGE));
    for _ in 0..objects {
        let k = u(K_RANGE);
        let omega = u(OMEGA_RANGE);
        let e = u(E_RANGE);
        let mut p = u(P_RANGE);
        while p <= 0.0 {
            p = u(P_RANGE);
        }
        let tau = u((0.0, p));
        x.extend_from_slice(&[k, omega, e, p, tau]);
    }
    x
}

/// Filtering model with a fixed number of objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeplerModel {
    pub objects: usize,
}

impl KeplerModel {
    pub fn new(objects: usize) -> Self {
        Self { objects }
    }
}

impl StateSpaceModel for KeplerModel {
    fn dim(&self) -> usize {
        1 + 5 * self.objects
    }
    fn obs_dim(&self) -> Option<usize> {
        Some(OBSERVATIONS_PER_STEP)
    }
    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        out.copy_from_slice(&kepler_prior_sample(self.objects, rng));
    }
    fn sample_transition(&self, prev: &[f64], _t: usize, rng: &mut RngStream, out: &mut [f64]) {
        kepler_transition(prev, rng, out)
    }
    fn log_likelihood(&self, state: &[f64], obs: &[f64], t: usize) -> f64 {
        kepler_log_likelihood(state, obs, t as f64)
    }
}

impl Simulator for KeplerModel {
    fn sample_observation(&self, state: &[f64], t: usize, rng: &mut RngStream) -> Vec<f64> {
        let v = radial_velocity(state, t as f64).unwrap_or(f64::NAN);
        (0..OBSERVATIONS_PER_STEP).map(|_| v + NOISE_VAR.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    /// Ground truth follows the random walk restricted to the constraint box.
    fn simulate_transition(&self, prev: &[f64], _t: usize, rng: &mut RngStream, out: &mut [f64]) {
        for _ in 0..10_000 {
            kepler_transition(prev, rng, out);
            if in_constraint_box(out) {
                return;
            }
        }
        out.copy_from_slice(prev);
    }
}

/// Ground-truth configurations with zero, one and two objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeplerScenario {
    E1,
    E2,
    E3,
}

pub const TRUE_V0: f64 = 2.0;
pub const OBJECT_1: Orbit = Orbit { k: 25.0, omega: 0.61, e: 0.1, period: 15.0, tau: 3.0 };
pub const OBJECT_2: Orbit = Orbit { k: 5.0, omega: 0.17, e: 0.3, period: 115.0, tau: 25.0 };

impl KeplerScenario {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "E1" => Ok(Self::E1),
            "E2" => Ok(Self::E2),
            "E3" => Ok(Self::E3),
            _ => Err(Error::InvalidConfig(format!("unknown scenario '{name}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::E1 => "E1",
            Self::E2 => "E2",
            Self::E3 => "E3",
        }
    }

    pub fn objects(self) -> usize {
        match self {
            Self::E1 => 0,
            Self::E2 => 1,
            Self::E3 => 2,
        }
    }

    pub fn initial_state(self) -> Vec<f64> {
        let mut x = vec![TRUE_V0];
        for o in [OBJECT_1, OBJECT_2].iter().take(self.objects()) {
            x.extend_from_slice(&[o.k, o.omega, o.e, o.period, o.tau]);
        }
        x
    }

    pub fn model(self) -> KeplerModel {
        KeplerModel::new(self.objects())
    }
}
