use serde::Serialize;

use crate::cloud::WeightedCloud;
use crate::cmc::{compress, cmc_estimate, Selection};
use crate::error::Result;
use crate::exec::{map_runs, Execution};
use crate::models::Target;
use crate::partition::{Partition, PartitionRule};
use crate::rng::RngStream;

use super::tags;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ex1Method {
    /// Uniform resampling of M of the N samples.
    StandardResampling,
    Cmc(PartitionRule, Selection),
}

impl Ex1Method {
    pub const ALL: [Ex1Method; 5] = [
        Ex1Method::StandardResampling,
        Ex1Method::Cmc(PartitionRule::RandomGrid, Selection::Stochastic),
        Ex1Method::Cmc(PartitionRule::RandomGrid, Selection::WeightedMean),
        Ex1Method::Cmc(PartitionRule::UniformGrid, Selection::Stochastic),
        Ex1Method::Cmc(PartitionRule::UniformGrid, Selection::WeightedMean),
    ];

    fn labels(self) -> (&'static str, &'static str, &'static str) {
        match self {
            Ex1Method::StandardResampling => ("SR", "-", "-"),
            Ex1Method::Cmc(p, s) => ("CMC", p.label(), s.label()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ex1Config {
    pub targets: Vec<Target>,
    pub n: usize,
    pub runs: usize,
    pub ms: Vec<usize>,
    pub seed: u64,
    pub exec: Execution,
}

impl Ex1Config {
    pub fn desk() -> Self {
        Self {
            targets: vec![Target::Gamma, Target::Mixture],
            n: 10_000,
            runs: 200,
            ms: vec![10, 50, 100, 500],
            seed: 1,
            exec: Execution::default(),
        }
    }

    pub fn full_scale() -> Self {
        Self { n: 100_000, runs: 1000, ms: vec![10, 20, 50, 100, 200, 500, 1000], ..Self::desk() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ex1Row {
    pub target: String,
    pub method: String,
    pub partition: String,
    pub selection: String,
    pub m: usize,
    pub k: usize,
    pub rmse: f64,
}

fn moments(points: impl Iterator<Item = (f64, f64)>) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (x, w) in points {
        let mut p = 1.0;
        for o in out.iter_mut() {
            p *= x;
            *o += w * p;
        }
    }
    out
}

fn one_run(cfg: &Ex1Config, target: Target, ti: usize, run: usize) -> Result<Vec<[f64; 5]>> {
    let base = RngStream::new(cfg.seed, run as u64).derive(ti as u64);
    let xs = target.sample(cfg.n, &mut base.derive(tags::DATA));
    let cloud = WeightedCloud::uniform(1, xs.clone())?;
    let truth: Vec<f64> = (1..=5).map(|k| target.moment(k)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(cfg.ms.len() * Ex1Method::ALL.len());
    for (mi, &m) in cfg.ms.iter().enumerate() {
        for (ki, method) in Ex1Method::ALL.iter().enumerate() {
            let mut rng = base.derive(tags::METHOD + (mi * Ex1Method::ALL.len() + ki) as u64);
            let est = match *method {
                Ex1Method::StandardResampling => {
                    use rand::Rng;
                    let w = 1.0 / m as f64;
                    moments((0..m).map(|_| (xs[rng.random_range(0..xs.len())], w)))
                }
                Ex1Method::Cmc(rule, sel) => {
                    let p = Partition::build(rule, &cloud, m, &mut rng)?;
                    let sc = compress(&cloud, &p, sel, &mut rng)?;
                    let mut e = [0.0; 5];
                    for (k, ek) in e.iter_mut().enumerate() {
                        *ek = cmc_estimate(&sc, |s| s[0].powi(k as i32 + 1))?;
                    }
                    e
                }
            };
            let mut sq = [0.0; 5];
            for k in 0..5 {
                sq[k] = (est[k] - truth[k]).powi(2);
            }
            out.push(sq);
        }
    }
    Ok(out)
}

/// RMSE of the first five raw moments for every target, method and M.
pub fn run_ex1(cfg: &Ex1Config) -> Result<Vec<Ex1Row>> {
    let mut rows = Vec::new();
    for (ti, &target) in cfg.targets.iter().enumerate() {
        let per_run = map_runs(cfg.runs, cfg.exec, |r| one_run(cfg, target, ti, r));
        let per_run = per_run.into_iter().collect::<Result<Vec<_>>>()?;
        for (mi, &m) in cfg.ms.iter().enumerate() {
            for (ki, method) in Ex1Method::ALL.iter().enumerate() {
                let slot = mi * Ex1Method::ALL.len() + ki;
                let (name, part, sel) = method.labels();
                for k in 0..5 {
                    let mse = per_run.iter().map(|r| r[slot][k]).sum::<f64>() / cfg.runs.max(1) as f64;
                    rows.push(Ex1Row {
                        target: target.name().into(),
                        method: name.into(),
                        partition: part.into(),
                        selection: sel.into(),
                        m,
                        k: k + 1,
                        rmse: mse.sqrt(),
                    });
                }
            }
        }
    }
    Ok(rows)
}
