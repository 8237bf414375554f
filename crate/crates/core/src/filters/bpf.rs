use std::time::Instant;

use super::{check_inputs, initial_particles, mean_of, propagate, Algorithm, FilterConfig, FilterTrace, StateSpaceModel, StepRecord};
use crate::cloud::log_sum_exp;
use crate::error::Result;
use crate::resample::resample_indices;
use crate::rng::{purpose, RngStream};

/// Standard particle filter with unnormalized weight recursion
/// `w_t = w_{t-1} p(y_t | x_t)`. When the ESS drops to `eta * N` the cloud is
/// resampled and every weight is set to `Ẑ_t = (1/N) sum w_t`, so
/// `(1/N) sum w_T` is the evidence estimate at the end.
pub fn run_bpf<M: StateSpaceModel>(model: &M, ys: &[Vec<f64>], cfg: &FilterConfig, rng: &RngStream) -> Result<FilterTrace> {
    check_inputs(model, ys, cfg, Algorithm::Bpf)?;
    let start = Instant::now();
    let n = cfg.n;
    let d = model.dim();
    let ln_n = (n as f64).ln();
    let mut x = initial_particles(model, n, rng);
    let mut log_w = vec![0.0; n];
    let mut dead = false;
    let mut steps = Vec::with_capacity(ys.len());
    let mut total = 0u64;

    for (k, y) in ys.iter().enumerate() {
        let t = k + 1;
        x = propagate(model, &x, t, rng);
        for (lw, xi) in log_w.iter_mut().zip(x.chunks_exact(d)) {
            let ll = model.log_likelihood(xi, y, t);
            *lw += if ll.is_nan() { f64::NEG_INFINITY } else { ll };
        }
        total += n as u64;

        let mut lse = log_sum_exp(&log_w);
        let reset = lse == f64::NEG_INFINITY;
        if reset {
            dead = true;
            log_w.iter_mut().for_each(|l| *l = 0.0);
            lse = ln_n;
        }
        let w: Vec<f64> = log_w.iter().map(|l| (l - lse).exp()).collect();
        let ess = cfg.ess.evaluate(&w);
        let estimate = mean_of(&x, d, &w);
        let log_evidence = if dead { f64::NEG_INFINITY } else { lse - ln_n };

        let resampled = ess <= cfg.eta * n as f64;
        if resampled {
            let idx = resample_indices(&w, n, cfg.resample.systematic, &mut rng.step(t, purpose::RESAMPLE))?;
            let mut next = Vec::with_capacity(n * d);
            for i in idx {
                next.extend_from_slice(&x[i * d..(i + 1) * d]);
            }
            x = next;
            log_w.iter_mut().for_each(|l| *l = lse - ln_n);
        }
        steps.push(StepRecord { estimate, ess, resampled, log_evidence, evaluations: n, m: n, reset });
    }

    let log_z = if dead {
        f64::NEG_INFINITY
    } else if ys.is_empty() {
        0.0
    } else {
        log_sum_exp(&log_w) - ln_n
    };
    Ok(FilterTrace { algorithm: Algorithm::Bpf, steps, log_z, total_evaluations: total, wall_time: start.elapsed() })
}
