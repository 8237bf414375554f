use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use cmcpf::cloud::evidence_estimate;
use cmcpf::cmc::{compress, partial_weights, region_covariances};
use cmcpf::experiments::{
    budget_rows, run_budget, run_ex1, run_filter_experiment, run_kepler, BudgetConfig, Ex1Config, FilterExperiment,
    FilterExperimentConfig, KeplerConfig,
};
use cmcpf::filters::run_filter_with;
use cmcpf::io::{read_cloud_file, summary_as_cloud, write_cloud_csv, write_rows, ResultRow, SummaryJson, RESULT_SCHEMA};
use cmcpf::models::{generate_synthetic, AbsLogModel, GrowthModel, KeplerScenario, LinearGaussianModel, Simulator};
use cmcpf::{Execution, FilterConfig, Partition, PartitionRule, RngStream, Selection};

use crate::{AlgorithmArg, Cli, Command, Common, ModelArg, ScenarioArg};

const TRACE_SCHEMA: &str = "cmcpf.filter_trace.v1";
const EX1_SCHEMA: &str = "cmcpf.ex1_row.v1";
const SUMMARY_SCHEMA: &str = "cmcpf.summary_row.v1";

pub fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    match &cli.command {
        Command::Compress { input, covariances } => cmd_compress(c, input, *covariances),
        Command::Filter { model, algorithm, horizon } => cmd_filter(c, *model, *algorithm, *horizon),
        Command::Ex1 => cmd_ex1(c),
        Command::Ex2 => cmd_sweep(c, FilterExperimentConfig::abslog_desk(), "ex2-abslog"),
        Command::Ex3 => cmd_sweep(c, FilterExperimentConfig::growth_desk(), "ex3-growth"),
        Command::Kepler { scenario } => cmd_kepler(c, *scenario),
        Command::BenchBudget => cmd_bench_budget(c),
    }
}

fn exec(c: &Common) -> Execution {
    if c.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn single_m(c: &Common) -> Result<Option<usize>> {
    match c.m.as_deref() {
        None => Ok(None),
        Some([m]) => Ok(Some(*m)),
        Some(_) => bail!("this subcommand takes a single --m value"),
    }
}

fn create(c: &Common, name: &str) -> Result<BufWriter<File>> {
    let path = c.out.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn emit<T: Serialize>(c: &Common, name: &str, schema: &str, rows: &[T]) -> Result<()> {
    write_rows(create(c, name)?, schema, rows, !c.no_header_meta)?;
    println!("wrote {}", c.out.join(name).display());
    Ok(())
}

/// Writes deterministic rows and wall-time rows to separate files, so the
/// main file is identical across re-runs with the same seed.
fn emit_result_rows(c: &Common, stem: &str, rows: Vec<ResultRow>) -> Result<()> {
    let (timing, rows): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.metric == "wall_ms");
    emit(c, &format!("{stem}_rows.csv"), RESULT_SCHEMA, &rows)?;
    emit(c, &format!("{stem}_timing.csv"), RESULT_SCHEMA, &timing)
}

fn cmd_compress(c: &Common, input: &Path, covariances: bool) -> Result<()> {
    let cloud = read_cloud_file(input)?;
    let m = single_m(c)?.unwrap_or_else(|| cloud.len().min(100));
    let rule: PartitionRule = c.partition.map(Into::into).unwrap_or(PartitionRule::UniformGrid);
    let selection: Selection = c.select.map(Into::into).unwrap_or_default();
    let mut rng = RngStream::new(c.seed.unwrap_or(0), 0);
    let partition = Partition::build(rule, &cloud, m, &mut rng)?;
    let mut sc = compress(&cloud, &partition, selection, &mut rng)?;
    if covariances {
        let pw = partial_weights(&cloud, &partition.assign(&cloud)?)?;
        sc = sc.with_covariances(region_covariances(&cloud, &pw, 1e-6))?;
    }
    let mut csv = create(c, "summary_cloud.csv")?;
    write_cloud_csv(&summary_as_cloud(&sc)?, &mut csv)?;
    csv.flush()?;
    let mut json = create(c, "summary.json")?;
    serde_json::to_writer_pretty(&mut json, &SummaryJson::from_summary(&sc))?;
    writeln!(json)?;
    json.flush()?;
    println!("samples: {}", cloud.len());
    println!("summary particles: {} (requested {m}, {})", sc.len(), rule.label());
    println!("z_hat input: {:.12e}", evidence_estimate(&cloud).z_hat());
    println!("z_hat summary: {:.12e}", sc.evidence());
    println!("sum a_hat: {:.12}", sc.weights().iter().sum::<f64>());
    println!("wrote {} and {}", c.out.join("summary_cloud.csv").display(), c.out.join("summary.json").display());
    Ok(())
}

#[derive(Serialize)]
struct TraceRow {
    t: usize,
    estimate: f64,
    truth: f64,
    ess: f64,
    resampled: bool,
    m: usize,
    log_evidence: f64,
}

fn cmd_filter(c: &Common, model: ModelArg, algorithm: AlgorithmArg, horizon: Option<usize>) -> Result<()> {
    let horizon = horizon.unwrap_or(100);
    match model {
        ModelArg::Abslog => run_one(c, &AbsLogModel, algorithm, horizon),
        ModelArg::Growth => run_one(c, &GrowthModel, algorithm, horizon),
        ModelArg::Linear => run_one(c, &LinearGaussianModel::default(), algorithm, horizon),
    }
}

fn run_one<S: Simulator>(c: &Common, model: &S, algorithm: AlgorithmArg, horizon: usize) -> Result<()> {
    let n = c.n.unwrap_or(1000);
    let m = single_m(c)?.unwrap_or(n / 10).max(1);
    let mut cfg = match algorithm {
        AlgorithmArg::Bpf => FilterConfig::bpf(n, c.eta.unwrap_or(0.5)),
        AlgorithmArg::Cbpf => FilterConfig::cbpf(n, m),
        AlgorithmArg::Gcpf => FilterConfig::generic_cpf(n, m, c.eta.unwrap_or(0.5)),
    };
    if let Some(p) = c.partition {
        cfg.partition = p.into();
    }
    if let Some(s) = c.select {
        cfg.selection = s.into();
    }
    if let Some(e) = c.ess {
        cfg.ess = e.into();
    }
    cfg.seed = c.seed.unwrap_or(0);
    cfg.validate()?;
    let base = RngStream::new(cfg.seed, 0);
    let ds = generate_synthetic(model, None, horizon, &mut base.derive(1));
    let trace = run_filter_with(model, &ds.observations, &cfg, &base.derive(2))?;
    let rows: Vec<TraceRow> = trace
        .steps
        .iter()
        .zip(ds.trajectory())
        .enumerate()
        .map(|(t, (s, x))| TraceRow {
            t: t + 1,
            estimate: s.estimate[0],
            truth: x[0],
            ess: s.ess,
            resampled: s.resampled,
            m: s.m,
            log_evidence: s.log_evidence,
        })
        .collect();
    emit(c, "filter_trace.csv", TRACE_SCHEMA, &rows)?;
    println!("algorithm: {} (N = {n}, M = {})", trace.algorithm.label(), cfg.m);
    println!("rmse: {:.6}", trace.rmse(ds.trajectory()));
    println!("log_z: {:.6}", trace.log_z);
    println!("likelihood evaluations: {}", trace.total_evaluations);
    Ok(())
}

fn cmd_ex1(c: &Common) -> Result<()> {
    let mut cfg = if c.paper_scale { Ex1Config::full_scale() } else { Ex1Config::desk() };
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(r) = c.runs {
        cfg.runs = r;
    }
    if let Some(ms) = &c.m {
        cfg.ms = ms.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.exec = exec(c);
    let rows = run_ex1(&cfg)?;
    emit(c, "ex1-compression.csv", EX1_SCHEMA, &rows)
}

fn print_summary(exp: &FilterExperiment) {
    println!("{:<12} {:>6} {:>6} {:>10} {:>12}", "algorithm", "N", "M", "rmse", "evaluations");
    for s in exp.summary() {
        println!("{:<12} {:>6} {:>6} {:>10.4} {:>12.0}", s.algorithm, s.n, s.m, s.mean_rmse, s.mean_evaluations);
    }
}

fn cmd_sweep(c: &Common, mut cfg: FilterExperimentConfig, id: &str) -> Result<()> {
    if c.paper_scale {
        cfg = cfg.full_scale();
    }
    if let Some(n) = c.n {
        cfg.n = n;
        cfg.ms.retain(|&m| m <= n);
    }
    if let Some(r) = c.runs {
        cfg.runs = r;
    }
    if let Some(ms) = &c.m {
        cfg.ms = ms.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(p) = c.partition {
        cfg.partition = p.into();
    }
    if let Some(s) = c.select {
        cfg.selection = s.into();
    }
    if let Some(e) = c.ess {
        cfg.ess = e.into();
    }
    cfg.exec = exec(c);
    let mut exp = run_filter_experiment(&cfg)?;
    exp.id = id.to_string();
    print_summary(&exp);
    if !exp.budget_exact() {
        bail!("likelihood evaluation counts disagree with the filter budget");
    }
    emit_result_rows(c, id, exp.rows())?;
    emit(c, &format!("{id}_summary.csv"), SUMMARY_SCHEMA, &exp.summary())
}

fn cmd_kepler(c: &Common, scenario: ScenarioArg) -> Result<()> {
    let scenario = match scenario {
        ScenarioArg::E1 => KeplerScenario::E1,
        ScenarioArg::E2 => KeplerScenario::E2,
        ScenarioArg::E3 => KeplerScenario::E3,
    };
    let mut cfg = if c.paper_scale { KeplerConfig::full_scale(scenario) } else { KeplerConfig::desk(scenario) };
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(m) = single_m(c)? {
        cfg.m = m;
    }
    if let Some(r) = c.runs {
        cfg.runs = r;
    }
    if let Some(e) = c.eta {
        cfg.eta = e;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(p) = c.partition {
        cfg.partition = p.into();
    }
    if let Some(s) = c.select {
        cfg.selection = s.into();
    }
    if let Some(cost) = c.expensive_cost {
        cfg.expensive_cost = cost;
    }
    cfg.exec = exec(c);
    let exp = run_kepler(&cfg)?;
    let tables = [exp.pf_table(), exp.cpf_table()];
    println!("{:<4} {:>8} {:>8} {:>8} {:>10}", "", "zero", "one", "two", "time");
    for t in &tables {
        let d = &t.decisions;
        println!("{:<4} {:>7.1}% {:>7.1}% {:>7.1}% {:>10.3}", t.method, d.zero, d.one, d.two, t.normalized_time);
    }
    let stem = format!("ex4-kepler-{}", scenario.name().to_ascii_lowercase());
    emit_result_rows(c, &stem, exp.rows())?;
    let name = format!("{stem}_tables.json");
    let mut json = create(c, &name)?;
    serde_json::to_writer_pretty(&mut json, &tables)?;
    writeln!(json)?;
    json.flush()?;
    println!("wrote {}", c.out.join(name).display());
    Ok(())
}

fn cmd_bench_budget(c: &Common) -> Result<()> {
    let mut cfg = BudgetConfig::default();
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(m) = single_m(c)? {
        cfg.m = m;
    }
    if let Some(r) = c.runs {
        cfg.runs = r;
    }
    if let Some(cost) = c.expensive_cost {
        cfg.cost = cost;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.exec = exec(c);
    let records = run_budget(&cfg)?;
    let k = records.len().max(1) as f64;
    let mean = |f: &dyn Fn(&cmcpf::experiments::BudgetRecord) -> f64| records.iter().map(f).sum::<f64>() / k;
    let (bw, cw) = (mean(&|r| r.bpf.wall_ms), mean(&|r| r.cbpf.wall_ms));
    println!("BPF  N = {}: {:.1} ms, {:.0} evaluations", cfg.n, bw, mean(&|r| r.bpf.counted as f64));
    println!("CBPF M = {}: {:.1} ms, {:.0} evaluations", cfg.m, cw, mean(&|r| r.cbpf.counted as f64));
    println!("normalized time: {:.3}", cw / bw);
    emit_result_rows(c, "bench-budget", budget_rows(&records, cfg.seed))
}
