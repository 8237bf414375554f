//! Cloud files and result tables.
//!
//! Cloud CSV: a `# dim,<d>` line, then one row per sample `x_1,...,x_d,log_w`.
//! Cloud JSON: `{"dim": d, "samples": [[...], ...], "log_weights": [...]}`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::WeightedCloud;
use crate::cmc::SummaryCloud;
use crate::error::{Error, Result};
use crate::models::Dataset;

pub const RESULT_SCHEMA: &str = "cmcpf.result_row.v1";

fn parse_dim(line: &str, line_no: usize) -> Result<usize> {
    let body = line.trim().trim_start_matches('#').trim();
    let rest = body
        .strip_prefix("dim")
        .map(|r| r.trim_start().trim_start_matches(',').trim())
        .ok_or_else(|| Error::Parse { line: line_no, message: format!("expected 'dim,<d>', got '{}'", line.trim()) })?;
    match rest.parse::<usize>() {
        Ok(d) if d > 0 => Ok(d),
        _ => Err(Error::Parse { line: line_no, message: format!("invalid dimension '{rest}'") }),
    }
}

fn parse_log_weight(field: &str) -> Option<f64> {
    match field.trim() {
        "-inf" | "-Inf" | "-infinity" => Some(f64::NEG_INFINITY),
        s => s.parse().ok(),
    }
}

pub fn read_cloud_csv<R: Read>(reader: R) -> Result<WeightedCloud> {
    let mut dim = None;
    let mut samples = Vec::new();
    let mut log_w = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let body = line.trim();
        if body.is_empty() {
            continue;
        }
        let Some(d) = dim else {
            dim = Some(parse_dim(body, line_no)?);
            continue;
        };
        if body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse { line: line_no, message: format!("expected {} fields, found {}", d + 1, fields.len()) });
        }
        for f in &fields[..d] {
            let v: f64 = f.parse().map_err(|_| Error::Parse { line: line_no, message: format!("invalid number '{f}'") })?;
            samples.push(v);
        }
        let lw = parse_log_weight(fields[d])
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("invalid log-weight '{}'", fields[d]) })?;
        log_w.push(lw);
    }
    let Some(d) = dim else {
        return Err(Error::Parse { line: 0, message: "missing 'dim,<d>' line".into() });
    };
    WeightedCloud::new(d, samples, log_w)
}

pub fn write_cloud_csv<W: Write>(cloud: &WeightedCloud, mut out: W) -> Result<()> {
    writeln!(out, "# dim,{}", cloud.dim())?;
    for (x, lw) in cloud.iter_samples().zip(cloud.log_weights()) {
        let mut fields: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        fields.push(if *lw == f64::NEG_INFINITY { "-inf".into() } else { format!("{lw:e}") });
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CloudJson {
    dim: usize,
    samples: Vec<Vec<f64>>,
    log_weights: Vec<Option<f64>>,
}

pub fn read_cloud_json<R: Read>(reader: R) -> Result<WeightedCloud> {
    let doc: CloudJson = serde_json::from_reader(reader)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let mut samples = Vec::with_capacity(doc.dim * doc.samples.len());
    for s in &doc.samples {
        if s.len() != doc.dim {
            return Err(Error::DimensionMismatch { expected: doc.dim, found: s.len() });
        }
        samples.extend_from_slice(s);
    }
    let lw = doc.log_weights.iter().map(|l| l.unwrap_or(f64::NEG_INFINITY)).collect();
    WeightedCloud::new(doc.dim, samples, lw)
}

/// Dispatch on the extension: `.json` or anything else as CSV.
pub fn read_cloud_file(path: &Path) -> Result<WeightedCloud> {
    let f = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        read_cloud_json(f)
    } else {
        read_cloud_csv(f)
    }
}

/// Summary particles, masses, evidences and covariances.
#[derive(Serialize)]
pub struct SummaryJson {
    pub dim: usize,
    pub particles: Vec<Vec<f64>>,
    pub a_hat: Vec<f64>,
    pub log_a: Vec<f64>,
    pub counts: Vec<usize>,
    pub covariances: Option<Vec<Vec<Vec<f64>>>>,
    pub evidence: f64,
}

impl SummaryJson {
    pub fn from_summary(sc: &SummaryCloud) -> Self {
        let covariances = sc.covariances().map(|cs| {
            cs.iter().map(|c| (0..c.nrows()).map(|i| (0..c.ncols()).map(|j| c[(i, j)]).collect()).collect()).collect()
        });
        Self {
            dim: sc.dim(),
            particles: sc.iter_particles().map(<[f64]>::to_vec).collect(),
            a_hat: sc.weights().to_vec(),
            log_a: sc.log_evidence().to_vec(),
            counts: sc.counts().to_vec(),
            covariances,
            evidence: sc.evidence(),
        }
    }
}

/// The summary as a cloud file of M' samples with log-weights
/// `ln a_m + ln M'`, so its importance-sampling evidence equals `sum_m a_m`.
pub fn summary_as_cloud(sc: &SummaryCloud) -> Result<WeightedCloud> {
    let shift = (sc.len() as f64).ln();
    WeightedCloud::new(sc.dim(), sc.particles().to_vec(), sc.log_evidence().iter().map(|l| l + shift).collect())
}

/// Comment lines opening every result CSV.
pub fn write_header_meta<W: Write>(out: &mut W, schema: &str, timestamp: bool) -> Result<()> {
    writeln!(out, "# schema: {schema}")?;
    if timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# generated: {secs}")?;
    }
    Ok(())
}

/// One measurement of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub run: usize,
    pub n: usize,
    pub m: usize,
    pub algorithm: String,
    pub metric: String,
    pub value: f64,
}

/// Serialize rows under a schema comment. `timestamp` adds a second comment
/// line with the generation time.
pub fn write_rows<W: Write, T: Serialize>(mut out: W, schema: &str, rows: &[T], timestamp: bool) -> Result<()> {
    write_header_meta(&mut out, schema, timestamp)?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_observations_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "r", "y"])?;
    for (t, ys) in ds.observations.iter().enumerate() {
        for (r, y) in ys.iter().enumerate() {
            w.write_record([(t + 1).to_string(), (r + 1).to_string(), y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_states_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = ds.states.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (t, x) in ds.states.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(x.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
