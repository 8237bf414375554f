mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cmcpf::{EssKind, PartitionRule, Selection};

#[derive(Parser, Debug)]
#[command(name = "cmcpf", version, about = "Compressed Monte Carlo and compressed particle filter experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Unset values fall back to the
/// subcommand's own defaults.
#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// One or more summary counts, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum)]
    pub partition: Option<PartitionArg>,
    #[arg(long, global = true, value_enum)]
    pub select: Option<SelectArg>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub ess: Option<EssArg>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Use the full experiment sizes instead of the desk-scale defaults.
    #[arg(long, global = true)]
    pub paper_scale: bool,
    /// Spin iterations added to every likelihood evaluation.
    #[arg(long, global = true)]
    pub expensive_cost: Option<u64>,
    /// Omit the timestamp comment from result files.
    #[arg(long, global = true)]
    pub no_header_meta: bool,
    /// Run replications one after another.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compress a weighted cloud file into summary particles.
    Compress {
        /// Cloud file (`.csv` or `.json`).
        input: PathBuf,
        /// Attach per-region covariances to the JSON output.
        #[arg(long)]
        covariances: bool,
    },
    /// Run one filter on synthetic data from a scalar model.
    Filter {
        #[arg(long, value_enum, default_value = "abslog")]
        model: ModelArg,
        #[arg(long, value_enum, default_value = "cbpf")]
        algorithm: AlgorithmArg,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Moments of static targets: standard resampling against compression.
    Ex1,
    /// Abs/log model: RMSE against the compression rate.
    Ex2,
    /// Growth model: compression rate sweep and equal-budget comparison.
    Ex3,
    /// Orbit-count model selection from radial-velocity data.
    Kepler {
        #[arg(long, value_enum, default_value = "e1")]
        scenario: ScenarioArg,
    },
    /// Wall time of BPF against CBPF with an expensive likelihood.
    BenchBudget,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PartitionArg {
    P1,
    P2,
    P3,
}

impl From<PartitionArg> for PartitionRule {
    fn from(p: PartitionArg) -> Self {
        match p {
            PartitionArg::P1 => PartitionRule::RandomGrid,
            PartitionArg::P2 => PartitionRule::UniformGrid,
            PartitionArg::P3 => PartitionRule::Voronoi,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SelectArg {
    Stoch,
    Mean,
}

impl From<SelectArg> for Selection {
    fn from(s: SelectArg) -> Self {
        match s {
            SelectArg::Stoch => Selection::Stochastic,
            SelectArg::Mean => Selection::WeightedMean,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum EssArg {
    Sumsq,
    Max,
}

impl From<EssArg> for EssKind {
    fn from(e: EssArg) -> Self {
        match e {
            EssArg::Sumsq => EssKind::InverseSumSquares,
            EssArg::Max => EssKind::InverseMax,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModelArg {
    Abslog,
    Growth,
    Linear,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum AlgorithmArg {
    Bpf,
    Cbpf,
    Gcpf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ScenarioArg {
    E1,
    E2,
    E3,
}

const EXIT_ARGUMENT: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    use cmcpf::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Parse { .. } | E::DimensionMismatch { .. } | E::Io(_) | E::Empty | E::UnknownTarget(_)) => EXIT_DATA,
        Some(
            E::AllWeightsZero
            | E::CovarianceNotSpd { .. }
            | E::NonpositivePeriod(_)
            | E::EccentricityOutOfRange(_)
            | E::ConstraintViolation,
        ) => EXIT_NUMERICAL,
        Some(_) => EXIT_ARGUMENT,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_DATA,
        None => EXIT_ARGUMENT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
