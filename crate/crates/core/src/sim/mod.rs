//! Monte Carlo harness for the two simulation studies.

pub mod config;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod study1;
pub mod study2;

use crate::error::{Error, Result};
use crate::population::Method;
use metrics::Summary;

pub use study1::{run_study1, Study1Config};
pub use study2::{run_study2, Scenario, Study2Config};

/// One output line: an estimator's Monte Carlo summary for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub study: String,
    pub scenario_or_phi: String,
    pub parameter: String,
    pub n: usize,
    pub method: Method,
    /// `summary.reps` counts the replications that entered the summary.
    pub summary: Summary,
    pub failed_reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<MetricsRow>,
    /// Skipped replications with the reason, in replication order.
    pub failures: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

/// Estimation failures that skip a replication instead of aborting the run.
pub(crate) fn is_replication_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::InfeasibleSampleSize { .. }
            | Error::CalibrationInfeasible { .. }
            | Error::Separation { .. }
            | Error::DegenerateResponse(_)
            | Error::DegenerateWeight { .. }
            | Error::NoConvergence { .. }
            | Error::Singular { .. }
            | Error::DesignSupport { .. }
    )
}

/// Evaluates `f(0), ..., f(reps - 1)`, possibly in parallel; results come back in index order.
#[cfg(feature = "parallel")]
pub(crate) fn run_indexed<T, F>(reps: usize, opts: &RunOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match opts.threads {
        Some(0) => Err(Error::InvalidInput("thread count must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidInput(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(|| (0..reps).into_par_iter().map(&f).collect()))
        }
        None => Ok((0..reps).into_par_iter().map(&f).collect()),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn run_indexed<T, F>(reps: usize, opts: &RunOptions, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> T,
{
    if opts.threads == Some(0) {
        return Err(Error::InvalidInput("thread count must be at least 1".into()));
    }
    Ok((0..reps).map(f).collect())
}
