use std::time::Duration;

use serde::Serialize;

use crate::cmc::Selection;
use crate::error::Result;
use crate::exec::{map_runs, Execution};
use crate::filters::{Algorithm, FilterConfig};
use crate::io::ResultRow;
use crate::models::{generate_synthetic, KeplerModel, KeplerScenario, SyntheticExpensiveModel};
use crate::partition::PartitionRule;
use crate::rng::RngStream;

use super::filtering::{counted_run, FilterRecord};
use super::tags;

pub const HYPOTHESES: usize = 3;

#[derive(Clone, Debug)]
pub struct KeplerConfig {
    pub scenario: KeplerScenario,
    pub runs: usize,
    pub n: usize,
    pub m: usize,
    pub eta: f64,
    pub horizon: usize,
    pub seed: u64,
    pub partition: PartitionRule,
    pub selection: Selection,
    /// Spin iterations added to every likelihood evaluation.
    pub expensive_cost: u64,
    pub exec: Execution,
}

impl KeplerConfig {
    pub fn desk(scenario: KeplerScenario) -> Self {
        Self {
            scenario,
            runs: 50,
            n: 10_000,
            m: 100,
            eta: 0.5,
            horizon: 50,
            seed: 4,
            partition: PartitionRule::UniformGrid,
            selection: Selection::Stochastic,
            expensive_cost: 0,
            exec: Execution::default(),
        }
    }

    pub fn full_scale(scenario: KeplerScenario) -> Self {
        Self { runs: 500, n: 100_000, ..Self::desk(scenario) }
    }
}

/// One filter applied to the three object-count hypotheses of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub algorithm: Algorithm,
    pub log_z: [f64; HYPOTHESES],
    /// Hypothesis with the largest evidence.
    pub decision: usize,
    /// `rank[j]` is the place (0 = first) of hypothesis j.
    pub rank: [usize; HYPOTHESES],
    pub wall: Duration,
    pub records: Vec<FilterRecord>,
}

fn rank_hypotheses(log_z: &[f64; HYPOTHESES]) -> [usize; HYPOTHESES] {
    let mut order: Vec<usize> = (0..HYPOTHESES).collect();
    order.sort_by(|&a, &b| log_z[b].total_cmp(&log_z[a]).then(a.cmp(&b)));
    let mut rank = [0; HYPOTHESES];
    for (place, &j) in order.iter().enumerate() {
        rank[j] = place;
    }
    rank
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KeplerRun {
    pub run: usize,
    pub pf: MethodOutcome,
    pub cpf: MethodOutcome,
}

/// Percentages of first, second and third places.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankTriples {
    pub zero: [f64; HYPOTHESES],
    pub one: [f64; HYPOTHESES],
    pub two: [f64; HYPOTHESES],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decisions {
    pub zero: f64,
    pub one: f64,
    pub two: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionTable {
    pub scenario: String,
    pub method: String,
    pub decisions: Decisions,
    pub rankings: RankTriples,
    pub normalized_time: f64,
}

#[derive(Clone, Debug)]
pub struct KeplerExperiment {
    pub config: KeplerConfig,
    pub runs: Vec<KeplerRun>,
}

impl KeplerExperiment {
    fn outcomes(&self, pf: bool) -> impl Iterator<Item = &MethodOutcome> {
        self.runs.iter().map(move |r| if pf { &r.pf } else { &r.cpf })
    }

    fn table(&self, pf: bool) -> DecisionTable {
        let k = self.runs.len().max(1) as f64;
        let mut dec = [0.0; HYPOTHESES];
        let mut ranks = [[0.0; HYPOTHESES]; HYPOTHESES];
        for o in self.outcomes(pf) {
            dec[o.decision] += 100.0 / k;
            for j in 0..HYPOTHESES {
                ranks[j][o.rank[j]] += 100.0 / k;
            }
        }
        let time = |pf: bool| self.outcomes(pf).map(|o| o.wall.as_secs_f64()).sum::<f64>();
        let pf_time = time(true);
        DecisionTable {
            scenario: self.config.scenario.name().into(),
            method: if pf { "PF" } else { "CPF" }.into(),
            decisions: Decisions { zero: dec[0], one: dec[1], two: dec[2] },
            rankings: RankTriples { zero: ranks[0], one: ranks[1], two: ranks[2] },
            normalized_time: if pf_time > 0.0 { time(pf) / pf_time } else { f64::NAN },
        }
    }

    pub fn pf_table(&self) -> DecisionTable {
        self.table(true)
    }

    pub fn cpf_table(&self) -> DecisionTable {
        self.table(false)
    }

    pub fn budget_exact(&self) -> bool {
        self.runs.iter().all(|r| r.pf.records.iter().chain(&r.cpf.records).all(FilterRecord::budget_exact))
    }

    pub fn rows(&self) -> Vec<ResultRow> {
        let id = format!("ex4-kepler-{}", self.config.scenario.name());
        let mut out = Vec::new();
        for r in &self.runs {
            for o in [&r.pf, &r.cpf] {
                let row = |metric: String, value: f64, rec: &FilterRecord| ResultRow {
                    experiment: id.clone(),
                    seed: self.config.seed,
                    run: r.run,
                    n: rec.n,
                    m: rec.m,
                    algorithm: o.algorithm.label().into(),
                    metric,
                    value,
                };
                for (s, rec) in o.records.iter().enumerate() {
                    out.push(row(format!("logZ_S{s}"), rec.log_z, rec));
                    out.push(row(format!("eval_count_S{s}"), rec.counted as f64, rec));
                }
                out.push(row("decision".into(), o.decision as f64, &o.records[0]));
                out.push(row("wall_ms".into(), o.wall.as_secs_f64() * 1e3, &o.records[0]));
            }
        }
        out
    }
}

fn method<M>(cfg: &KeplerConfig, algorithm: Algorithm, ys: &[Vec<f64>], truth: &[Vec<f64>], base: &RngStream, run: usize, wrap: M) -> Result<MethodOutcome>
where
    M: Fn(usize) -> SyntheticExpensiveModel<KeplerModel>,
{
    let fc = FilterConfig {
        algorithm,
        n: cfg.n,
        m: if algorithm == Algorithm::Bpf { cfg.n } else { cfg.m },
        eta: cfg.eta,
        partition: cfg.partition,
        selection: cfg.selection,
        seed: cfg.seed,
        ..FilterConfig::default()
    };
    let mut log_z = [0.0; HYPOTHESES];
    let mut records = Vec::with_capacity(HYPOTHESES);
    let mut wall = Duration::ZERO;
    for s in 0..HYPOTHESES {
        let model = wrap(s);
        // Truth has a different dimension under other hypotheses; RMSE is
        // only meaningful for the matching one.
        let rec = counted_run(&model, ys, if s == cfg.scenario.objects() { truth } else { &[] }, &fc, &base.derive(tags::FILTER + s as u64), run)?;
        wall += Duration::from_secs_f64(rec.wall_ms / 1e3);
        log_z[s] = rec.log_z;
        records.push(rec);
    }
    let rank = rank_hypotheses(&log_z);
    let decision = rank.iter().position(|&p| p == 0).unwrap_or(0);
    Ok(MethodOutcome { algorithm, log_z, decision, rank, wall, records })
}

/// Synthetic data per run, then PF and generic CPF evidence for 0, 1 and 2
/// objects; decisions pick the largest evidence.
pub fn run_kepler(cfg: &KeplerConfig) -> Result<KeplerExperiment> {
    FilterConfig::generic_cpf(cfg.n, cfg.m, cfg.eta).validate()?;
    let truth_model = cfg.scenario.model();
    let runs = map_runs(cfg.runs, cfg.exec, |run| -> Result<KeplerRun> {
        let base = RngStream::new(cfg.seed, run as u64);
        let ds = generate_synthetic(&truth_model, Some(&cfg.scenario.initial_state()), cfg.horizon, &mut base.derive(tags::DATA));
        let wrap = |s: usize| SyntheticExpensiveModel::new(KeplerModel::new(s), cfg.expensive_cost);
        let pf = method(cfg, Algorithm::Bpf, &ds.observations, ds.trajectory(), &base, run, wrap)?;
        let cpf = method(cfg, Algorithm::GenericCpf, &ds.observations, ds.trajectory(), &base, run, wrap)?;
        Ok(KeplerRun { run, pf, cpf })
    });
    Ok(KeplerExperiment { config: cfg.clone(), runs: runs.into_iter().collect::<Result<_>>()? })
}
