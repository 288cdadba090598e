use std::fmt::Display;

use clusterkr::{Error, Result};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

/// What to do when a replication cannot be completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum FailurePolicy {
    /// Stop and report the first failure in replication order.
    #[default]
    Abort,
    /// Drop failed replications and count them.
    Skip,
}

/// Runs `work` for every replication index in parallel and returns the
/// successful results in index order with the failure count.
pub(crate) fn replicate<T: Send>(
    reps: usize,
    policy: FailurePolicy,
    work: impl Fn(u64) -> Result<T> + Sync,
) -> Result<(Vec<T>, usize)> {
    if reps == 0 {
        return Err(Error::InvalidArgument("at least one replication is needed".into()));
    }
    let results: Vec<Result<T>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| work(r).map_err(|e| e.context(format!("replication {r}"))))
        .collect();
    let mut done = Vec::with_capacity(reps);
    let mut failures = 0;
    for r in results {
        match r {
            Ok(v) => done.push(v),
            Err(e) if policy == FailurePolicy::Abort => return Err(e),
            Err(_) => failures += 1,
        }
    }
    if done.is_empty() {
        return Err(Error::Validation(format!("all {reps} replications failed")));
    }
    Ok((done, failures))
}

/// Sample mean and its standard error (`NaN` for a single value).
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn as_display<T: Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}
