use serde::Serialize;

use crate::cloud::EssKind;
use crate::cmc::Selection;
use crate::error::{Error, Result};
use crate::exec::{map_runs, Execution};
use crate::filters::{run_filter_with, Algorithm, CountingModel, FilterConfig, StateSpaceModel};
use crate::io::ResultRow;
use crate::models::{generate_synthetic, AbsLogModel, GrowthModel, Simulator};
use crate::partition::PartitionRule;
use crate::rng::RngStream;

use super::tags;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarModel {
    AbsLog,
    Growth,
}

impl ScalarModel {
    pub fn from_name(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abslog" => Ok(Self::AbsLog),
            "growth" => Ok(Self::Growth),
            _ => Err(Error::UnknownTarget(s.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AbsLog => "abslog",
            Self::Growth => "growth",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FilterExperimentConfig {
    pub model: ScalarModel,
    pub n: usize,
    /// CBPF summary counts; also the BPF sizes of the equal-budget sweep.
    pub ms: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub horizon: usize,
    pub partition: PartitionRule,
    pub selection: Selection,
    pub ess: EssKind,
    pub equal_budget: bool,
    pub exec: Execution,
}

impl FilterExperimentConfig {
    pub fn abslog_desk() -> Self {
        Self {
            model: ScalarModel::AbsLog,
            n: 1000,
            ms: vec![20, 50, 100, 150, 200, 300, 500, 1000],
            runs: 500,
            seed: 2,
            horizon: AbsLogModel::HORIZON,
            partition: PartitionRule::UniformGrid,
            selection: Selection::WeightedMean,
            ess: EssKind::InverseSumSquares,
            equal_budget: false,
            exec: Execution::default(),
        }
    }

    pub fn growth_desk() -> Self {
        Self {
            model: ScalarModel::Growth,
            ms: vec![20, 50, 100, 500],
            runs: 300,
            seed: 3,
            horizon: GrowthModel::HORIZON,
            equal_budget: true,
            ..Self::abslog_desk()
        }
    }

    pub fn full_scale(mut self) -> Self {
        self.runs = match self.model {
            ScalarModel::AbsLog => 5000,
            ScalarModel::Growth => 1000,
        };
        self
    }
}

/// Outcome of one filter in one replication.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterRecord {
    pub run: usize,
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub rmse: f64,
    pub log_z: f64,
    /// Evaluations according to the trace.
    pub evaluations: u64,
    /// Evaluations seen by the counting wrapper.
    pub counted: u64,
    /// `N T` for BPF, `sum_t M_t` for the compressed filters.
    pub expected: u64,
    pub wall_ms: f64,
}

impl FilterRecord {
    pub fn budget_exact(&self) -> bool {
        self.counted == self.evaluations && self.counted == self.expected
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub runs: usize,
    pub mean_rmse: f64,
    pub mean_evaluations: f64,
}

#[derive(Clone, Debug)]
pub struct FilterExperiment {
    pub id: String,
    pub seed: u64,
    pub records: Vec<FilterRecord>,
}

impl FilterExperiment {
    pub fn mean_rmse(&self, algorithm: Algorithm, n: usize, m: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.algorithm == algorithm && r.n == n && r.m == m)
            .map(|r| r.rmse)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn budget_exact(&self) -> bool {
        self.records.iter().all(FilterRecord::budget_exact)
    }

    pub fn rows(&self) -> Vec<ResultRow> {
        let mut out = Vec::with_capacity(self.records.len() * 3);
        for r in &self.records {
            for (metric, value) in [("rmse", r.rmse), ("eval_count", r.counted as f64), ("wall_ms", r.wall_ms)] {
                out.push(ResultRow {
                    experiment: self.id.clone(),
                    seed: self.seed,
                    run: r.run,
                    n: r.n,
                    m: r.m,
                    algorithm: r.algorithm.label().into(),
                    metric: metric.into(),
                    value,
                });
            }
        }
        out
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(Algorithm, usize, usize)> = Vec::new();
        for r in &self.records {
            if !keys.contains(&(r.algorithm, r.n, r.m)) {
                keys.push((r.algorithm, r.n, r.m));
            }
        }
        keys.into_iter()
            .map(|(a, n, m)| {
                let sel: Vec<&FilterRecord> = self.records.iter().filter(|r| (r.algorithm, r.n, r.m) == (a, n, m)).collect();
                let k = sel.len() as f64;
                SummaryRow {
                    experiment: self.id.clone(),
                    algorithm: a.label().into(),
                    n,
                    m,
                    runs: sel.len(),
                    mean_rmse: sel.iter().map(|r| r.rmse).sum::<f64>() / k,
                    mean_evaluations: sel.iter().map(|r| r.counted as f64).sum::<f64>() / k,
                }
            })
            .collect()
    }
}

/// Runs one configured filter on a counting wrapper and checks its budget.
pub(crate) fn counted_run<M: StateSpaceModel>(
    model: &M,
    ys: &[Vec<f64>],
    truth: &[Vec<f64>],
    cfg: &FilterConfig,
    rng: &RngStream,
    run: usize,
) -> Result<FilterRecord> {
    let counting = CountingModel::new(model);
    let trace = run_filter_with(&counting, ys, cfg, rng)?;
    let expected = match cfg.algorithm {
        Algorithm::Bpf => (cfg.n * ys.len()) as u64,
        _ => trace.steps.iter().map(|s| s.m as u64).sum(),
    };
    Ok(FilterRecord {
        run,
        algorithm: cfg.algorithm,
        n: cfg.n,
        m: if cfg.algorithm == Algorithm::Bpf { cfg.n } else { cfg.m },
        rmse: trace.rmse(truth),
        log_z: trace.log_z,
        evaluations: trace.total_evaluations,
        counted: counting.count(),
        expected,
        wall_ms: trace.wall_time.as_secs_f64() * 1e3,
    })
}

fn configs(cfg: &FilterExperimentConfig) -> Vec<FilterConfig> {
    let with_common = |mut c: FilterConfig| {
        c.partition = cfg.partition;
        c.selection = cfg.selection;
        c.ess = cfg.ess;
        c
    };
    let mut out = vec![with_common(FilterConfig::bpf(cfg.n, 1.0))];
    for &m in &cfg.ms {
        out.push(with_common(FilterConfig::cbpf(cfg.n, m)));
    }
    if cfg.equal_budget {
        for &m in cfg.ms.iter().filter(|&&m| m != cfg.n) {
            out.push(with_common(FilterConfig::bpf(m, 1.0)));
        }
    }
    out
}

fn replicate<S: Simulator>(model: &S, cfg: &FilterExperimentConfig, run: usize) -> Result<Vec<FilterRecord>> {
    let base = RngStream::new(cfg.seed, run as u64);
    let ds = generate_synthetic(model, None, cfg.horizon, &mut base.derive(tags::DATA));
    let frng = base.derive(tags::FILTER);
    configs(cfg)
        .iter()
        .map(|fc| counted_run(model, &ds.observations, ds.trajectory(), fc, &frng, run))
        .collect()
}

/// BPF with N particles (resampling every step) against CBPF with (N, M)
/// for each M, on shared datasets and shared filter streams. With
/// `equal_budget`, BPF with M particles is added for each M.
pub fn run_filter_experiment(cfg: &FilterExperimentConfig) -> Result<FilterExperiment> {
    for fc in configs(cfg) {
        fc.validate()?;
    }
    let per_run = match cfg.model {
        ScalarModel::AbsLog => map_runs(cfg.runs, cfg.exec, |r| replicate(&AbsLogModel, cfg, r)),
        ScalarModel::Growth => map_runs(cfg.runs, cfg.exec, |r| replicate(&GrowthModel, cfg, r)),
    };
    let mut records = Vec::new();
    for r in per_run {
        records.extend(r?);
    }
    Ok(FilterExperiment { id: format!("filter-{}", cfg.model.name()), seed: cfg.seed, records })
}
