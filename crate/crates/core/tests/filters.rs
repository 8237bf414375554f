mod common;

use rand::Rng;
use rand_distr::StandardNormal;

use cmcpf::filters::{run_filter, run_filter_with, AdaptiveM, CountingModel};
use cmcpf::models::{generate_synthetic, AbsLogModel, GrowthModel, KeplerModel, LinearGaussianModel, SyntheticExpensiveModel};
use cmcpf::resample::ResampleMode;
use cmcpf::{Algorithm, Error, FilterConfig, PartitionRule, RngStream, StateSpaceModel};

/// Random walk whose observations carry no information.
struct Flat;

impl StateSpaceModel for Flat {
    fn dim(&self) -> usize {
        1
    }
    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = rng.sample(StandardNormal);
    }
    fn sample_transition(&self, prev: &[f64], _t: usize, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = prev[0] + rng.sample::<f64, _>(StandardNormal);
    }
    fn log_likelihood(&self, _state: &[f64], _obs: &[f64], _t: usize) -> f64 {
        -1.5
    }
}

/// Every state is impossible at step 2.
struct Wall;

impl StateSpaceModel for Wall {
    fn dim(&self) -> usize {
        1
    }
    fn sample_initial(&self, _rng: &mut RngStream, out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn sample_transition(&self, prev: &[f64], _t: usize, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = prev[0] + rng.sample::<f64, _>(StandardNormal);
    }
    fn log_likelihood(&self, _state: &[f64], _obs: &[f64], t: usize) -> f64 {
        if t == 2 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    }
}

fn abslog_data(t: usize, seed: u64) -> Vec<Vec<f64>> {
    generate_synthetic(&AbsLogModel, None, t, &mut RngStream::new(seed, 0)).observations
}

#[test]
fn zero_threshold_never_resamples() {
    let ys = abslog_data(30, 1);
    let trace = run_filter(&AbsLogModel, &ys, &FilterConfig::bpf(200, 0.0)).unwrap();
    assert!(trace.steps.iter().all(|s| !s.resampled));
    let gcpf = run_filter(&AbsLogModel, &ys, &FilterConfig::generic_cpf(200, 20, 0.0)).unwrap();
    assert!(gcpf.steps.iter().all(|s| !s.resampled));
}

#[test]
fn full_threshold_always_resamples_generic_cpf() {
    let ys = abslog_data(30, 2);
    let trace = run_filter(&AbsLogModel, &ys, &FilterConfig::generic_cpf(200, 20, 1.0)).unwrap();
    assert!(trace.steps.iter().all(|s| s.resampled));
}

#[test]
fn uninformative_likelihood_keeps_uniform_weights() {
    let ys = vec![vec![0.0]; 20];
    let n = 500;
    let trace = run_filter(&Flat, &ys, &FilterConfig::bpf(n, 0.5)).unwrap();
    for s in &trace.steps {
        assert!((s.ess - n as f64).abs() < 1e-6);
        assert!(!s.resampled);
    }
    assert!((trace.log_z - (-1.5 * 20.0)).abs() < 1e-9);
}

#[test]
fn single_summary_particle() {
    let ys = abslog_data(20, 3);
    let trace = run_filter(&AbsLogModel, &ys, &FilterConfig::cbpf(300, 1)).unwrap();
    assert!(trace.steps.iter().all(|s| s.m == 1 && s.evaluations == 1 && (s.ess - 1.0).abs() < 1e-12));
    assert_eq!(trace.total_evaluations, 20);
}

#[test]
fn evaluation_budget_matches_counter() {
    let ds = generate_synthetic(&GrowthModel, None, 40, &mut RngStream::new(4, 0));
    let adaptive = FilterConfig {
        adaptive: AdaptiveM { enabled: true, gamma: 0.5, m_min: 10 },
        ..FilterConfig::cbpf(400, 40)
    };
    for cfg in [FilterConfig::bpf(400, 0.5), FilterConfig::cbpf(400, 37), FilterConfig::generic_cpf(400, 40, 0.5), adaptive] {
        let model = CountingModel::new(GrowthModel);
        let trace = run_filter(&model, &ds.observations, &cfg).unwrap();
        let per_step: u64 = trace.steps.iter().map(|s| s.evaluations as u64).sum();
        assert_eq!(model.count(), trace.total_evaluations);
        assert_eq!(per_step, trace.total_evaluations);
        let expected = match cfg.algorithm {
            Algorithm::Bpf => 400 * 40,
            _ => trace.steps.iter().map(|s| s.m as u64).sum(),
        };
        assert_eq!(trace.total_evaluations, expected);
        if cfg.algorithm != Algorithm::Bpf {
            assert!(trace.steps.iter().all(|s| s.m <= 400));
        }
    }
}

#[test]
fn adaptive_schedule_moves_with_ess() {
    let ds = generate_synthetic(&GrowthModel, None, 30, &mut RngStream::new(5, 0));
    let cfg = FilterConfig { adaptive: AdaptiveM { enabled: true, gamma: 0.5, m_min: 10 }, ..FilterConfig::cbpf(500, 50) };
    let trace = run_filter(&GrowthModel, &ds.observations, &cfg).unwrap();
    assert!(trace.steps[0].m <= 50);
    assert!(trace.steps.iter().all(|s| s.m >= 1 && s.m <= 500));
    let distinct: std::collections::BTreeSet<usize> = trace.steps.iter().map(|s| s.m).collect();
    assert!(distinct.len() > 1);
}

#[test]
fn identical_config_gives_identical_trace() {
    let ys = abslog_data(30, 6);
    for cfg in [
        FilterConfig::bpf(300, 0.5).with_seed(9),
        FilterConfig::cbpf(300, 30).with_seed(9).with_partition(PartitionRule::RandomGrid),
        FilterConfig::generic_cpf(300, 30, 0.5).with_seed(9).with_partition(PartitionRule::Voronoi),
    ] {
        let a = run_filter(&AbsLogModel, &ys, &cfg).unwrap();
        let b = run_filter(&AbsLogModel, &ys, &cfg).unwrap();
        assert!(a.same_path(&b));
        let c = run_filter(&AbsLogModel, &ys, &cfg.clone().with_seed(10)).unwrap();
        assert!(!a.same_path(&c));
    }
}

#[test]
fn generic_cpf_at_full_rate_matches_bpf() {
    let ys = abslog_data(40, 7);
    let rng = RngStream::new(7, 1);
    for eta in [0.3, 0.7] {
        let bpf = run_filter_with(&AbsLogModel, &ys, &FilterConfig::bpf(250, eta), &rng).unwrap();
        let cfg = FilterConfig::generic_cpf(250, 250, eta).with_partition(PartitionRule::Voronoi);
        let gcpf = run_filter_with(&AbsLogModel, &ys, &cfg, &rng).unwrap();
        for (a, b) in bpf.steps.iter().zip(&gcpf.steps) {
            assert_eq!(a.resampled, b.resampled);
            assert!((a.estimate[0] - b.estimate[0]).abs() <= 1e-12);
            assert!((a.log_evidence - b.log_evidence).abs() <= 1e-9);
        }
    }
}

#[test]
fn divisibility_is_enforced() {
    let ys = abslog_data(5, 8);
    let err = run_filter(&AbsLogModel, &ys, &FilterConfig::generic_cpf(100, 30, 0.5)).unwrap_err();
    assert_eq!(err, Error::DivisibilityViolation { n: 100, m: 30 });
    assert!(run_filter(&AbsLogModel, &ys, &FilterConfig::cbpf(100, 30)).is_ok());
}

#[test]
fn bad_configs_are_rejected() {
    let ys = abslog_data(5, 8);
    assert!(run_filter(&AbsLogModel, &ys, &FilterConfig::cbpf(100, 0)).is_err());
    assert!(run_filter(&AbsLogModel, &ys, &FilterConfig::cbpf(100, 101)).is_err());
    assert!(run_filter(&AbsLogModel, &ys, &FilterConfig::bpf(100, 1.5)).is_err());
    let adaptive_gcpf = FilterConfig { adaptive: AdaptiveM { enabled: true, gamma: 1.0, m_min: 1 }, ..FilterConfig::generic_cpf(100, 10, 0.5) };
    assert!(run_filter(&AbsLogModel, &ys, &adaptive_gcpf).is_err());
    let wrong_dim = vec![vec![0.0, 1.0]; 3];
    assert!(run_filter(&KeplerModel::new(1), &wrong_dim, &FilterConfig::bpf(10, 0.5)).is_err());
}

#[test]
fn total_weight_collapse_resets_and_flags() {
    let ys = vec![vec![0.0]; 4];
    for cfg in [FilterConfig::bpf(50, 0.5), FilterConfig::cbpf(50, 5), FilterConfig::generic_cpf(50, 5, 0.5)] {
        let trace = run_filter(&Wall, &ys, &cfg).unwrap();
        assert_eq!(trace.resets(), 1);
        assert!(trace.steps[1].reset);
        assert_eq!(trace.log_z, f64::NEG_INFINITY);
        assert!(trace.steps[0].log_evidence.is_finite());
    }
}

#[test]
fn evidence_is_finite_on_regular_data() {
    let ys = abslog_data(50, 9);
    for cfg in [FilterConfig::bpf(200, 0.5), FilterConfig::cbpf(200, 20), FilterConfig::generic_cpf(200, 20, 0.5)] {
        assert!(run_filter(&AbsLogModel, &ys, &cfg).unwrap().log_z.is_finite());
    }
}

#[test]
fn regularized_resampling_runs() {
    let ys = abslog_data(30, 10);
    let mut cfg = FilterConfig::cbpf(300, 30);
    cfg.resample.mode = ResampleMode::Regularized;
    let trace = run_filter(&AbsLogModel, &ys, &cfg).unwrap();
    assert!(trace.log_z.is_finite());
}

#[test]
fn kalman_agreement_small() {
    let model = LinearGaussianModel::default();
    let ds = generate_synthetic(&model, None, 25, &mut RngStream::new(11, 0));
    let ys: Vec<f64> = ds.observations.iter().map(|y| y[0]).collect();
    let exact = common::kalman_log_evidence(model.a, model.q, model.r, model.p0, &ys);
    let runs: Vec<f64> = (0..40)
        .map(|r| run_filter_with(&model, &ds.observations, &FilterConfig::bpf(2000, 0.5), &RngStream::new(12, r)).unwrap().log_z)
        .collect();
    let (mean, sd) = common::mean_sd(&runs);
    assert!((mean - exact).abs() <= 4.0 * sd / (runs.len() as f64).sqrt() + 1e-3, "{mean} vs {exact}");
}

#[test]
fn expensive_wrapper_keeps_values_and_budget() {
    let ys = abslog_data(15, 13);
    let cfg = FilterConfig::cbpf(200, 20);
    let plain = run_filter(&AbsLogModel, &ys, &cfg).unwrap();
    let wrapped = CountingModel::new(SyntheticExpensiveModel::new(AbsLogModel, 500));
    let slow = run_filter(&wrapped, &ys, &cfg).unwrap();
    assert!(plain.same_path(&slow));
    assert_eq!(wrapped.count(), slow.total_evaluations);
}
