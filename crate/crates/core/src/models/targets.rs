use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Gamma shape and scale.
pub const GAMMA_SHAPE: f64 = 4.0;
pub const GAMMA_SCALE: f64 = 0.5;

/// `(weight, mean, variance)` of the mixture components.
pub const MIXTURE: [(f64, f64, f64); 2] = [(0.5, -2.0, 1.0), (0.5, 4.0, 0.25)];

/// Static one-dimensional targets with closed-form moments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Gamma,
    Mixture,
}

impl Target {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gamma" => Ok(Target::Gamma),
            "mixture" => Ok(Target::Mixture),
            _ => Err(Error::UnknownTarget(name.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Gamma => "gamma",
            Target::Mixture => "mixture",
        }
    }

    pub fn sample(self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        match self {
            Target::Gamma => {
                let g = Gamma::new(GAMMA_SHAPE, GAMMA_SCALE).expect("valid gamma parameters");
                (0..n).map(|_| g.sample(rng)).collect()
            }
            Target::Mixture => {
                let comps: Vec<Normal<f64>> =
                    MIXTURE.iter().map(|&(_, mu, var)| Normal::new(mu, var.sqrt()).expect("valid normal")).collect();
                (0..n)
                    .map(|_| {
                        let k = if rng.random::<f64>() < MIXTURE[0].0 { 0 } else { 1 };
                        comps[k].sample(rng)
                    })
                    .collect()
            }
        }
    }

    pub fn moment(self, k: usize) -> Result<f64> {
        match self {
            Target::Gamma => gamma_moments(k),
            Target::Mixture => mixture_moments(k),
        }
    }
}

fn check_order(k: usize) -> Result<()> {
    if (1..=5).contains(&k) {
        Ok(())
    } else {
        Err(Error::MomentOrder(k))
    }
}

/// `E[X^k] = scale^k Γ(shape + k) / Γ(shape)`.
pub fn gamma_moments(k: usize) -> Result<f64> {
    check_order(k)?;
    Ok((0..k).map(|j| GAMMA_SCALE * (GAMMA_SHAPE + j as f64)).product())
}

/// Raw moment of `N(mu, var)` for orders 1..=5.
pub fn gaussian_raw_moment(mu: f64, var: f64, k: usize) -> Result<f64> {
    check_order(k)?;
    let (m, v) = (mu, var);
    Ok(match k {
        1 => m,
        2 => m * m + v,
        3 => m.powi(3) + 3.0 * m * v,
        4 => m.powi(4) + 6.0 * m * m * v + 3.0 * v * v,
        _ => m.powi(5) + 10.0 * m.powi(3) * v + 15.0 * m * v * v,
    })
}

pub fn mixture_moments(k: usize) -> Result<f64> {
    MIXTURE.iter().map(|&(w, mu, var)| gaussian_raw_moment(mu, var, k).map(|m| w * m)).sum()
}
