use serde::Serialize;

use crate::error::Result;
use crate::exec::{map_runs, Execution};
use crate::filters::FilterConfig;
use crate::io::ResultRow;
use crate::models::{generate_synthetic, AbsLogModel, SyntheticExpensiveModel};
use crate::rng::RngStream;

use super::filtering::{counted_run, FilterRecord};
use super::tags;

#[derive(Clone, Debug)]
pub struct BudgetConfig {
    pub n: usize,
    pub m: usize,
    pub runs: usize,
    pub horizon: usize,
    /// Spin iterations per likelihood evaluation.
    pub cost: u64,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { n: 1000, m: 50, runs: 20, horizon: 50, cost: 20_000, seed: 5, exec: Execution::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BudgetRecord {
    pub bpf: FilterRecord,
    pub cbpf: FilterRecord,
}

/// BPF(N) against CBPF(N, M) on the abs/log model with an artificial
/// likelihood cost.
pub fn run_budget(cfg: &BudgetConfig) -> Result<Vec<BudgetRecord>> {
    let bpf_cfg = FilterConfig::bpf(cfg.n, 1.0);
    let cbpf_cfg = FilterConfig::cbpf(cfg.n, cfg.m);
    cbpf_cfg.validate()?;
    let model = SyntheticExpensiveModel::new(AbsLogModel, cfg.cost);
    map_runs(cfg.runs, cfg.exec, |run| {
        let base = RngStream::new(cfg.seed, run as u64);
        let ds = generate_synthetic(&AbsLogModel, None, cfg.horizon, &mut base.derive(tags::DATA));
        let frng = base.derive(tags::FILTER);
        Ok(BudgetRecord {
            bpf: counted_run(&model, &ds.observations, ds.trajectory(), &bpf_cfg, &frng, run)?,
            cbpf: counted_run(&model, &ds.observations, ds.trajectory(), &cbpf_cfg, &frng, run)?,
        })
    })
    .into_iter()
    .collect()
}

pub fn budget_rows(records: &[BudgetRecord], seed: u64) -> Vec<ResultRow> {
    let mut out = Vec::new();
    for rec in records {
        for r in [&rec.bpf, &rec.cbpf] {
            for (metric, value) in [("eval_count", r.counted as f64), ("wall_ms", r.wall_ms), ("rmse", r.rmse)] {
                out.push(ResultRow {
                    experiment: "bench-budget".into(),
                    seed,
                    run: r.run,
                    n: r.n,
                    m: r.m,
                    algorithm: r.algorithm.label().into(),
                    metric: metric.into(),
                    value,
                });
            }
        }
    }
    out
}
