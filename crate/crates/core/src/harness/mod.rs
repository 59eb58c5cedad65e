//! Experiment driver: ensembles, data collection, evaluation reports, curves and races.

pub mod collect;
pub mod config;
pub mod curves;
pub mod dataset;
pub mod evaluate;
pub mod experiment;
pub mod io;
pub mod race;

use rayon::prelude::*;
use thiserror::Error;

use crate::cnf::CnfError;
use crate::lmp::LmpError;
use crate::monitor::MonitorError;
use crate::portfolio::RaceError;
use crate::regress::RegressError;
use crate::solver::ConfigError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error(transparent)]
    Solver(#[from] ConfigError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Train(#[from] LmpError),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Race(#[from] RaceError),
}

impl HarnessError {
    /// Process exit code for the error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Solver(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Data(_) | HarnessError::Cnf(_) | HarnessError::Monitor(_) => 4,
            HarnessError::Train(_) | HarnessError::Regress(_) | HarnessError::Race(_) => 5,
        }
    }
}

/// Maps `f` over `items` on `jobs` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| items.par_iter().map(f).collect())
}
