//! Replicated experiments: static-target compression, filtering accuracy
//! against compression rate, Kepler model selection and evaluation budgets.

mod budget;
mod ex1;
mod filtering;
mod kepler;

pub use budget::{budget_rows, run_budget, BudgetConfig, BudgetRecord};
pub use ex1::{run_ex1, Ex1Config, Ex1Method, Ex1Row};
pub use filtering::{run_filter_experiment, FilterExperiment, FilterExperimentConfig, FilterRecord, ScalarModel, SummaryRow};
pub use kepler::{run_kepler, DecisionTable, Decisions, KeplerConfig, KeplerExperiment, KeplerRun, MethodOutcome, RankTriples};

/// Stream tags shared by the runners.
pub(crate) mod tags {
    pub const DATA: u64 = 0xDA7A;
    pub const FILTER: u64 = 0xF117;
    pub const METHOD: u64 = 0x3E7;
}
