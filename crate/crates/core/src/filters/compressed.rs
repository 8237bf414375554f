use std::time::Instant;

use super::{
    adaptive_m, check_inputs, initial_particles, mean_of, propagate, Algorithm, FilterConfig, FilterTrace,
    StateSpaceModel, StepRecord,
};
use crate::cloud::{log_sum_exp, WeightedCloud};
use crate::cmc::{partial_weights, region_covariances, select_stochastic, select_weighted_mean, Selection, SummaryCloud};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::resample::{resample, ResampleMode};
use crate::rng::{purpose, RngStream};

struct Weighted {
    sc: SummaryCloud,
    /// `ln w^(m) = ln â_m + ln p(y_t | s_m)`.
    log_w: Vec<f64>,
    /// Normalized `w̄^(m)`.
    w: Vec<f64>,
    lse: f64,
    reset: bool,
}

fn compress_and_weigh<M: StateSpaceModel>(
    model: &M,
    cfg: &FilterConfig,
    x: Vec<f64>,
    log_rho: Vec<f64>,
    m: usize,
    t: usize,
    y: &[f64],
    rng: &RngStream,
) -> Result<Weighted> {
    let d = model.dim();
    let cloud = WeightedCloud::new(d, x, log_rho)?;
    let partition = Partition::build(cfg.partition, &cloud, m, &mut rng.step(t, purpose::PARTITION))?;
    let idx = partition.assign(&cloud)?;
    let pw = partial_weights(&cloud, &idx)?;
    let mut sc = match cfg.selection {
        Selection::Stochastic => select_stochastic(&cloud, &pw, &mut rng.step(t, purpose::SELECT)),
        Selection::WeightedMean => select_weighted_mean(&cloud, &pw),
        Selection::FunctionSpecific => return Err(Error::ProvenanceMismatch),
    };
    if cfg.resample.mode == ResampleMode::Regularized {
        sc = sc.with_covariances(region_covariances(&cloud, &pw, cfg.resample.eps))?;
    }
    let log_w: Vec<f64> = sc
        .iter_particles()
        .zip(sc.weights())
        .map(|(s, &a)| {
            let ll = model.log_likelihood(s, y, t);
            if ll.is_nan() {
                f64::NEG_INFINITY
            } else {
                a.ln() + ll
            }
        })
        .collect();
    let lse = log_sum_exp(&log_w);
    let reset = lse == f64::NEG_INFINITY;
    let w = if reset {
        vec![1.0 / log_w.len() as f64; log_w.len()]
    } else {
        log_w.iter().map(|l| (l - lse).exp()).collect()
    };
    sc.reweight(w.clone())?;
    Ok(Weighted { sc, log_w, w, lse, reset })
}

/// ESS of the summary weights spread evenly over the samples each summary
/// particle stands for; lies in `[1, N]`.
fn expanded_ess(w: &[f64], counts: &[usize]) -> f64 {
    1.0 / w.iter().zip(counts).map(|(w, &c)| w * w / c as f64).sum::<f64>()
}

/// Compressed bootstrap filter: compress the propagated uniform cloud,
/// weight the summary particles by `â_m p(y_t | s_m)` and resample N states
/// from them at every step.
pub fn run_cbpf<M: StateSpaceModel>(model: &M, ys: &[Vec<f64>], cfg: &FilterConfig, rng: &RngStream) -> Result<FilterTrace> {
    check_inputs(model, ys, cfg, Algorithm::Cbpf)?;
    let start = Instant::now();
    let n = cfg.n;
    let d = model.dim();
    let mut x = initial_particles(model, n, rng);
    let mut m_t = cfg.m;
    let mut log_z = 0.0;
    let mut steps = Vec::with_capacity(ys.len());
    let mut total = 0u64;

    for (k, y) in ys.iter().enumerate() {
        let t = k + 1;
        let prop = propagate(model, &x, t, rng);
        let step = compress_and_weigh(model, cfg, prop, vec![0.0; n], m_t, t, y, rng)?;
        let used = step.log_w.len();
        total += used as u64;
        log_z = if step.reset { f64::NEG_INFINITY } else { log_z + step.lse };
        let ess = cfg.ess.evaluate(&step.w);
        let estimate = mean_of(step.sc.particles(), d, &step.w);
        if cfg.adaptive.enabled {
            let e = expanded_ess(&step.w, step.sc.counts());
            m_t = adaptive_m(e, cfg.adaptive.gamma, cfg.adaptive.m_min, n);
        }
        x = resample(&step.sc, n, &cfg.resample, &mut rng.step(t, purpose::RESAMPLE))?;
        steps.push(StepRecord {
            estimate,
            ess,
            resampled: true,
            log_evidence: log_z,
            evaluations: used,
            m: used,
            reset: step.reset,
        });
    }
    Ok(FilterTrace { algorithm: Algorithm::Cbpf, steps, log_z, total_evaluations: total, wall_time: start.elapsed() })
}

/// Generic compressed filter: compress the weighted cloud, resample when the
/// ESS of the summary weights drops to `eta * M`, and otherwise carry the
/// summary particles forward as N weighted copies.
///
/// When a grid yields M' non-empty regions instead of M, slot `n` carries
/// summary `floor(n M' / N)` and the weight of each summary is split evenly
/// over its copies. With M' = M this is the usual K-fold expansion.
pub fn run_generic_cpf<M: StateSpaceModel>(
    model: &M,
    ys: &[Vec<f64>],
    cfg: &FilterConfig,
    rng: &RngStream,
) -> Result<FilterTrace> {
    check_inputs(model, ys, cfg, Algorithm::GenericCpf)?;
    let start = Instant::now();
    let n = cfg.n;
    let d = model.dim();
    let mut x = initial_particles(model, n, rng);
    let mut log_rho = vec![-(n as f64).ln(); n];
    let mut log_z = 0.0;
    let mut steps = Vec::with_capacity(ys.len());
    let mut total = 0u64;

    for (k, y) in ys.iter().enumerate() {
        let t = k + 1;
        let prop = propagate(model, &x, t, rng);
        let step = compress_and_weigh(model, cfg, prop, std::mem::take(&mut log_rho), cfg.m, t, y, rng)?;
        let used = step.log_w.len();
        total += used as u64;
        log_z = if step.reset { f64::NEG_INFINITY } else { log_z + step.lse };
        let ess = cfg.ess.evaluate(&step.w);
        let estimate = mean_of(step.sc.particles(), d, &step.w);

        let resampled = ess <= cfg.eta * used as f64;
        if resampled {
            x = resample(&step.sc, n, &cfg.resample, &mut rng.step(t, purpose::RESAMPLE))?;
            let flat = if step.reset { 0.0 } else { step.lse };
            log_rho = vec![flat; n];
        } else {
            let slot = |i: usize| i * used / n;
            let mut copies = vec![0usize; used];
            (0..n).for_each(|i| copies[slot(i)] += 1);
            x = Vec::with_capacity(n * d);
            log_rho = Vec::with_capacity(n);
            for i in 0..n {
                let m = slot(i);
                x.extend_from_slice(step.sc.particle(m));
                let lw = if step.reset { 0.0 } else { step.log_w[m] };
                log_rho.push(lw - (copies[m] as f64).ln());
            }
        }
        steps.push(StepRecord { estimate, ess, resampled, log_evidence: log_z, evaluations: used, m: used, reset: step.reset });
    }
    Ok(FilterTrace {
        algorithm: Algorithm::GenericCpf,
        steps,
        log_z,
        total_evaluations: total,
        wall_time: start.elapsed(),
    })
}
