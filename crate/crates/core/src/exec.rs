//! Replication scheduling. Runs are independent, each with its own stream,
//! so results are identical whichever executor is used.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `f(0), ..., f(runs - 1)` in run order.
pub fn map_runs<T, F>(runs: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..runs).into_par_iter().map(f).collect()
        }
        _ => (0..runs).map(f).collect(),
    }
}
