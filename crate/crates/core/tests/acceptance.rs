//! Acceptance gate. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits with a nonzero status if any of them fails.

mod common;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use cmcpf::cloud::{evidence_estimate, is_estimate};
use cmcpf::cmc::{cmc_estimate, cmc_estimate_identity, compress, partial_weights, select_function_specific};
use cmcpf::experiments::{
    run_ex1, run_filter_experiment, run_kepler, Ex1Config, FilterExperiment, FilterExperimentConfig, KeplerConfig,
    KeplerExperiment,
};
use cmcpf::filters::{run_filter_with, Algorithm, FilterConfig};
use cmcpf::models::kepler::kepler_solve;
use cmcpf::models::{generate_synthetic, AbsLogModel, KeplerScenario, LinearGaussianModel};
use cmcpf::{Partition, PartitionRule, RngStream, Selection, WeightedCloud};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_cloud(n: usize, d: usize, rng: &mut RngStream) -> WeightedCloud {
    let xs: Vec<f64> = (0..n * d).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let lw: Vec<f64> = (0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    WeightedCloud::new(d, xs, lw).unwrap()
}

fn integrand(kind: usize, x: &[f64]) -> f64 {
    match kind {
        0 => x.iter().sum(),
        1 => x[0] * x[0],
        2 => x.iter().map(|v| v.sin()).product::<f64>() + 0.5,
        _ => (-x.iter().map(|v| v * v).sum::<f64>() / 8.0).exp(),
    }
}

struct Fixture {
    cloud: WeightedCloud,
    partition: Partition,
    h: usize,
}

fn fixtures() -> Vec<Fixture> {
    let rules = [PartitionRule::RandomGrid, PartitionRule::UniformGrid, PartitionRule::Voronoi];
    (0..100)
        .map(|i| {
            let mut rng = RngStream::new(11, i);
            let n = rng.random_range(10..=1000);
            let d = rng.random_range(1..=3);
            let cloud = random_cloud(n, d, &mut rng);
            let rule = rules[rng.random_range(0..rules.len())];
            let m_cap = if rule == PartitionRule::Voronoi { 60 } else { n };
            let m = rng.random_range(1..=m_cap.min(n));
            let partition = Partition::build(rule, &cloud, m, &mut rng).unwrap();
            Fixture { cloud, partition, h: rng.random_range(0..4) }
        })
        .collect()
}

fn reconstruction(fx: &[Fixture]) -> Outcome {
    let mut worst = 0.0f64;
    for f in fx {
        let h = |x: &[f64]| integrand(f.h, x);
        let idx = f.partition.assign(&f.cloud).map_err(|e| e.to_string())?;
        let pw = partial_weights(&f.cloud, &idx).map_err(|e| e.to_string())?;
        let tilde = cmc_estimate_identity(&select_function_specific(&f.cloud, &pw, h)).map_err(|e| e.to_string())?;
        let hat = is_estimate(&f.cloud, h).map_err(|e| e.to_string())?;
        let w = f.cloud.normalized().map_err(|e| e.to_string())?;
        let scale: f64 = f.cloud.iter_samples().zip(w).map(|(x, w)| w * h(x).abs()).sum();
        worst = worst.max((tilde - hat).abs() / scale.max(f64::MIN_POSITIVE));
    }
    check(worst <= 1e-12, format!("{} fixtures, worst scaled error {worst:.2e}", fx.len()))
}

fn evidence_identity(fx: &[Fixture]) -> Outcome {
    let mut worst = 0.0f64;
    for f in fx {
        let sc = compress(&f.cloud, &f.partition, Selection::WeightedMean, &mut RngStream::new(12, 0))
            .map_err(|e| e.to_string())?;
        let z = evidence_estimate(&f.cloud).z_hat();
        let sum: f64 = sc.log_evidence().iter().map(|l| l.exp()).sum();
        worst = worst.max((sum - z).abs() / z);
    }
    check(worst <= 1e-12, format!("{} fixtures, worst relative error {worst:.2e}", fx.len()))
}

fn stochastic_unbiasedness() -> Outcome {
    const REPS: usize = 10_000;
    let mut rng = RngStream::new(13, 0);
    let cloud = random_cloud(200, 1, &mut rng);
    let partition = Partition::build(PartitionRule::UniformGrid, &cloud, 10, &mut rng).map_err(|e| e.to_string())?;
    let hs: [fn(f64) -> f64; 2] = [|x| x, |x| x * x];
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, h) in ["x", "x^2"].iter().zip(hs) {
        let hat = is_estimate(&cloud, |x| h(x[0])).map_err(|e| e.to_string())?;
        let draws: Vec<f64> = (0..REPS)
            .map(|r| {
                let sc = compress(&cloud, &partition, Selection::Stochastic, &mut RngStream::new(14, r as u64)).unwrap();
                cmc_estimate(&sc, |x| h(x[0])).unwrap()
            })
            .collect();
        let (mean, sd) = common::mean_sd(&draws);
        let se = sd / (REPS as f64).sqrt();
        let z = (mean - hat).abs() / se;
        ok &= z <= 4.0;
        lines.push(format!("h={name}: |bias|/SE = {z:.2}"));
    }
    check(ok, lines.join(", "))
}

fn same_cloud(a: &WeightedCloud, sc: &cmcpf::SummaryCloud) -> bool {
    let w = a.normalized().unwrap();
    sc.len() == a.len()
        && sc.particles() == a.samples()
        && sc.weights().iter().zip(w).all(|(x, y)| (x - y).abs() <= 1e-12 * y.max(f64::MIN_POSITIVE))
}

fn degeneration() -> Outcome {
    let mut rng = RngStream::new(15, 0);
    let cloud = random_cloud(200, 2, &mut rng);
    let p3 = Partition::build(PartitionRule::Voronoi, &cloud, 200, &mut rng).map_err(|e| e.to_string())?;
    let sc3 = compress(&cloud, &p3, Selection::WeightedMean, &mut rng).map_err(|e| e.to_string())?;
    let lw: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let grid_cloud = WeightedCloud::from_scalars(&(0..200).map(|i| 0.5 * i as f64 - 7.0).collect::<Vec<_>>(), lw)
        .map_err(|e| e.to_string())?;
    let p2 = Partition::build(PartitionRule::UniformGrid, &grid_cloud, 200, &mut rng).map_err(|e| e.to_string())?;
    let sc2 = compress(&grid_cloud, &p2, Selection::WeightedMean, &mut rng).map_err(|e| e.to_string())?;
    let (ok3, ok2) = (same_cloud(&cloud, &sc3), same_cloud(&grid_cloud, &sc2));

    let n = 300;
    let ds = generate_synthetic(&AbsLogModel, None, 50, &mut RngStream::new(16, 0));
    let frng = RngStream::new(16, 1);
    let run = |c: FilterConfig| run_filter_with(&AbsLogModel, &ds.observations, &c, &frng).unwrap();
    let bpf = run(FilterConfig::bpf(n, 1.0));
    let cbpf = run(FilterConfig::cbpf(n, n).with_partition(PartitionRule::Voronoi));
    let bpf_half = run(FilterConfig::bpf(n, 0.5));
    let gcpf = run(FilterConfig::generic_cpf(n, n, 0.5).with_partition(PartitionRule::Voronoi));
    let gap = |a: &cmcpf::FilterTrace, b: &cmcpf::FilterTrace| {
        a.estimates().zip(b.estimates()).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
    };
    let (g1, g2) = (gap(&bpf, &cbpf), gap(&bpf_half, &gcpf));
    let ok = ok3 && ok2 && g1 <= 1e-12 && g2 <= 1e-12 && cbpf.steps.len() == bpf.steps.len();
    check(
        ok,
        format!("P3 identity {ok3}, P2 identity {ok2}, CBPF vs BPF max gap {g1:.1e}, generic CPF vs BPF max gap {g2:.1e}"),
    )
}

fn ex1_ordering() -> Outcome {
    let rows = run_ex1(&Ex1Config::desk()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut cells = 0;
    for det in rows.iter().filter(|r| r.partition == "P2" && r.selection == "mean") {
        let sr = rows
            .iter()
            .find(|r| r.method == "SR" && r.target == det.target && r.m == det.m && r.k == det.k)
            .ok_or("missing SR row")?;
        let ratio = det.rmse / sr.rmse;
        worst = worst.max(ratio);
        cells += 1;
        if !(det.rmse < sr.rmse) {
            failures.push(format!("{} M={} k={}", det.target, det.m, det.k));
        }
    }
    check(
        failures.is_empty() && cells == 40,
        format!("{cells} cells, worst RMSE ratio P2/SR {worst:.3}{}", if failures.is_empty() { String::new() } else { format!(", violations: {}", failures.join("; ")) }),
    )
}

fn compression_efficiency(exp: &FilterExperiment) -> Outcome {
    let bpf = exp.mean_rmse(Algorithm::Bpf, 1000, 1000).ok_or("missing BPF")?;
    let cbpf = exp.mean_rmse(Algorithm::Cbpf, 1000, 150).ok_or("missing CBPF")?;
    let rel = (cbpf / bpf - 1.0).abs();
    check(rel <= 0.05, format!("BPF(1000) {bpf:.4}, CBPF(1000,150) {cbpf:.4}, relative gap {:.2}%", 100.0 * rel))
}

fn growth_efficiency(exp: &FilterExperiment) -> Outcome {
    let bpf = exp.mean_rmse(Algorithm::Bpf, 1000, 1000).ok_or("missing BPF")?;
    let c20 = exp.mean_rmse(Algorithm::Cbpf, 1000, 20).ok_or("missing CBPF")?;
    let rel = (c20 / bpf - 1.0).abs();
    let mut ok = rel <= 0.10;
    let mut parts = vec![format!("BPF(1000) {bpf:.3}, CBPF(1000,20) {c20:.3} ({:.1}%)", 100.0 * rel)];
    for m in [20, 50, 100, 500] {
        let c = exp.mean_rmse(Algorithm::Cbpf, 1000, m).ok_or("missing CBPF")?;
        let b = exp.mean_rmse(Algorithm::Bpf, m, m).ok_or("missing BPF(M)")?;
        ok &= c <= b;
        parts.push(format!("M={m}: CBPF {c:.3} vs BPF {b:.3}"));
    }
    check(ok, parts.join("; "))
}

fn kepler_decisions(e1: &KeplerExperiment, e2: &KeplerExperiment) -> Outcome {
    let (p1, c1) = (e1.pf_table(), e1.cpf_table());
    let mut ok = p1.decisions.zero >= 95.0 && c1.decisions.zero >= 95.0;
    let mut parts = vec![format!("E1 zero-object decisions PF {:.0}%, CPF {:.0}%", p1.decisions.zero, c1.decisions.zero)];
    for t in [e2.pf_table(), e2.cpf_table()] {
        let d = &t.decisions;
        let modal = d.one > d.zero && d.one > d.two;
        let zero_last = t.rankings.zero[2] == 100.0;
        ok &= modal && zero_last;
        parts.push(format!(
            "E2 {} decisions {:.0}/{:.0}/{:.0}, zero-object ranked last {:.0}%",
            t.method, d.zero, d.one, d.two, t.rankings.zero[2]
        ));
    }
    check(ok, parts.join("; "))
}

fn solver_oracle() -> Outcome {
    let (mut gap, mut resid) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let m = TAU * i as f64 / 100.0;
        for j in 0..100 {
            let e = 0.95 * j as f64 / 99.0;
            let ecc = kepler_solve(m, e).map_err(|err| err.to_string())?;
            gap = gap.max((ecc - common::bisect_kepler(m, e)).abs());
            resid = resid.max((m - (ecc - e * ecc.sin())).abs());
        }
    }
    check(gap <= 1e-10 && resid <= 1e-12, format!("10^4 points, max oracle gap {gap:.1e}, max residual {resid:.1e}"))
}

fn budget(abslog: &FilterExperiment, growth: &FilterExperiment, e1: &KeplerExperiment, e2: &KeplerExperiment) -> Outcome {
    let filter_records = abslog.records.len() + growth.records.len();
    let kepler_records: usize = [e1, e2].iter().map(|e| e.runs.len() * 6).sum();
    let ok = abslog.budget_exact() && growth.budget_exact() && e1.budget_exact() && e2.budget_exact();
    check(ok, format!("{} filter runs checked against N*T or sum of M_t", filter_records + kepler_records))
}

fn kalman_oracle() -> Outcome {
    const RUNS: usize = 200;
    let model = LinearGaussianModel::default();
    let ds = generate_synthetic(&model, None, 50, &mut RngStream::new(17, 0));
    let ys: Vec<f64> = ds.observations.iter().map(|y| y[0]).collect();
    let exact = common::kalman_log_evidence(model.a, model.q, model.r, model.p0, &ys);
    let mut ok = true;
    let mut parts = vec![format!("exact {exact:.4}")];
    let configs = [
        ("BPF", FilterConfig::bpf(5000, 0.5)),
        ("generic CPF", FilterConfig::generic_cpf(5000, 5000, 0.5).with_partition(PartitionRule::Voronoi)),
    ];
    for (name, cfg) in configs {
        let log_z: Vec<f64> = (0..RUNS)
            .map(|r| run_filter_with(&model, &ds.observations, &cfg, &RngStream::new(18, r as u64)).unwrap().log_z)
            .collect();
        let (mean, sd) = common::mean_sd(&log_z);
        let sigma = sd / (RUNS as f64).sqrt();
        ok &= (mean - exact).abs() <= 3.0 * sigma;
        parts.push(format!("{name} mean {mean:.4} ({:.2} sigma)", (mean - exact) / sigma));
    }
    check(ok, parts.join(", "))
}

struct Gate {
    failures: usize,
}

impl Gate {
    fn run<T>(&mut self, id: usize, name: &str, limit: Duration, f: impl FnOnce() -> (Outcome, T)) -> T {
        let start = Instant::now();
        let (outcome, value) = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            self.failures += 1;
        }
        let timing = format!("{:.1}s of {}s{}", elapsed.as_secs_f64(), limit.as_secs(), if in_time { "" } else { ", over time" });
        println!("{} [{id:>2}] {name}: {detail} ({timing})", if pass { "PASS" } else { "FAIL" });
        value
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn main() {
    let mut gate = Gate { failures: 0 };
    let fx = fixtures();
    gate.run(1, "function-specific reconstruction", secs(5), || (reconstruction(&fx), ()));
    gate.run(2, "evidence preservation", secs(1), || (evidence_identity(&fx), ()));
    gate.run(3, "stochastic selection unbiasedness", secs(30), || (stochastic_unbiasedness(), ()));
    gate.run(4, "full-rate degeneration", secs(10), || (degeneration(), ()));
    gate.run(5, "static-target moment ordering", secs(180), || (ex1_ordering(), ()));

    let abslog = gate.run(6, "abs/log compression efficiency", secs(300), || {
        match run_filter_experiment(&FilterExperimentConfig::abslog_desk()) {
            Ok(exp) => (compression_efficiency(&exp), Some(exp)),
            Err(e) => (Err(e.to_string()), None),
        }
    });
    let growth = gate.run(7, "growth model efficiency and equal budget", secs(600), || {
        match run_filter_experiment(&FilterExperimentConfig::growth_desk()) {
            Ok(exp) => (growth_efficiency(&exp), Some(exp)),
            Err(e) => (Err(e.to_string()), None),
        }
    });
    let kepler = gate.run(8, "orbit-count decisions", secs(1200), || {
        let e1 = run_kepler(&KeplerConfig::desk(KeplerScenario::E1));
        let e2 = run_kepler(&KeplerConfig::desk(KeplerScenario::E2));
        match (e1, e2) {
            (Ok(a), Ok(b)) => (kepler_decisions(&a, &b), Some((a, b))),
            (Err(e), _) | (_, Err(e)) => (Err(e.to_string()), None),
        }
    });
    gate.run(9, "eccentric-anomaly solver oracle", secs(5), || (solver_oracle(), ()));
    gate.run(10, "likelihood budget accounting", secs(1), || {
        let outcome = match (&abslog, &growth, &kepler) {
            (Some(a), Some(g), Some((e1, e2))) => budget(a, g, e1, e2),
            _ => Err("upstream experiment failed to run".into()),
        };
        (outcome, ())
    });
    gate.run(11, "linear-Gaussian evidence oracle", secs(120), || (kalman_oracle(), ()));

    println!("acceptance: {} of 11 criteria failed", gate.failures);
    if gate.failures > 0 {
        std::process::exit(1);
    }
}
