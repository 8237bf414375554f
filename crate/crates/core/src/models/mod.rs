//! Static targets and state-space models used by the experiments.

mod expensive;
pub mod kepler;
mod scalar;
mod targets;

pub use expensive::SyntheticExpensiveModel;
pub use kepler::{KeplerModel, KeplerScenario};
pub use scalar::{AbsLogModel, GrowthModel, LinearGaussianModel};
pub use targets::{gamma_moments, gaussian_raw_moment, mixture_moments, Target};

use crate::filters::StateSpaceModel;
use crate::rng::RngStream;

/// A model that can also generate observations.
pub trait Simulator: StateSpaceModel {
    fn sample_observation(&self, state: &[f64], t: usize, rng: &mut RngStream) -> Vec<f64>;

    /// Transition used for ground-truth trajectories. Defaults to the
    /// filtering transition.
    fn simulate_transition(&self, prev: &[f64], t: usize, rng: &mut RngStream, out: &mut [f64]) {
        self.sample_transition(prev, t, rng, out)
    }
}

/// States `x_0..x_T` and observations `y_1..y_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
}

impl Dataset {
    /// `x_1..x_T`, aligned with the observations.
    pub fn trajectory(&self) -> &[Vec<f64>] {
        &self.states[1..]
    }
}

/// Forward simulation; `x0` overrides the initial draw.
pub fn generate_synthetic<S: Simulator>(model: &S, x0: Option<&[f64]>, t_max: usize, rng: &mut RngStream) -> Dataset {
    let d = model.dim();
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => {
            let mut v = vec![0.0; d];
            model.sample_initial(rng, &mut v);
            v
        }
    };
    let mut states = vec![x.clone()];
    let mut observations = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let mut next = vec![0.0; d];
        model.simulate_transition(&x, t, rng, &mut next);
        observations.push(model.sample_observation(&next, t, rng));
        states.push(next.clone());
        x = next;
    }
    Dataset { states, observations }
}
