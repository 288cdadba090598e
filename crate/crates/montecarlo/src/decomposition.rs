//! Expected cross-validation versus noise level plus integrated error of
//! leave-one-cluster-out fits.
//!
//! Each replication contributes one `CV(h)` value from its sample and one
//! integrated-error value from an independent sample: for every cluster `g`
//! the fit without `g` is compared with `m` on the window, integrated against
//! the standard normal density, and weighted by `n_g / n`.

use clusterkr::{
    cv_criterion, fit, CvMode, Error, Estimator, KernelSpec, Result, WeightWindow,
};
use serde::Serialize;

use crate::dgp::{generate, generate_for, DgpConfig, Purpose};
use crate::replicate::{as_display, mean_se, replicate, FailurePolicy};
use crate::truth::{marginal_density, sigma2_w, simpson, true_m};

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionConfig {
    pub dgp: DgpConfig,
    pub h: f64,
    pub estimator: Estimator,
    pub kernel: KernelSpec,
    pub window: (f64, f64),
    pub reps: usize,
    /// Simpson panels for each integral.
    pub quad_intervals: usize,
    pub policy: FailurePolicy,
}

impl DecompositionConfig {
    pub fn new(dgp: DgpConfig, h: f64, reps: usize) -> DecompositionConfig {
        DecompositionConfig {
            dgp,
            h,
            estimator: Estimator::Ll,
            kernel: KernelSpec::EPANECHNIKOV,
            window: dgp.setup.window(),
            reps,
            quad_intervals: 200,
            policy: FailurePolicy::Abort,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub h: f64,
    #[serde(serialize_with = "as_display")]
    pub estimator: Estimator,
    pub mean_cv: f64,
    pub se_cv: f64,
    pub sigma2_w: f64,
    pub imse: f64,
    pub se_imse: f64,
    /// `mean_cv - (sigma2_w + imse)`
    pub difference: f64,
    /// Standard error of `difference`; the two means use independent draws.
    pub se_difference: f64,
    pub reps: usize,
    pub failures: usize,
}

fn integrated_error(config: &DecompositionConfig, r: u64) -> Result<f64> {
    let ds = generate_for(&config.dgp, Purpose::Evaluation, r)?;
    let (lo, hi) = config.window;
    let n = ds.n() as f64;
    let mut total = 0.0;
    for g in 0..ds.num_clusters() {
        let rest = ds.drop_cluster(g)?;
        let mut failure = None;
        let v = simpson(
            |x| match fit(&rest, &config.kernel, config.estimator, config.h, &[x]) {
                Ok(f) => (f.estimate - true_m(config.dgp.setup, x)).powi(2) * marginal_density(x),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            config.quad_intervals,
        );
        if let Some(e) = failure {
            return Err(e.context(format!("fit without cluster {g}")));
        }
        total += ds.cluster_size(g) as f64 / n * v;
    }
    Ok(total)
}

pub fn run_cv_decomposition(config: &DecompositionConfig) -> Result<DecompositionReport> {
    config.dgp.validate()?;
    if config.dgp.clusters < 2 {
        return Err(Error::InvalidArgument("the decomposition needs at least two clusters".into()));
    }
    let window = WeightWindow::interval(config.window.0, config.window.1)?;
    let (draws, failures) = replicate(config.reps, config.policy, |r| {
        let ds = generate(&config.dgp, r)?;
        let cv = cv_criterion(&ds, &config.kernel, config.h, config.estimator, &window, CvMode::LeaveOneClusterOut)?;
        Ok((cv, integrated_error(config, r)?))
    })?;
    let (mean_cv, se_cv) = mean_se(&draws.iter().map(|d| d.0).collect::<Vec<_>>());
    let (imse, se_imse) = mean_se(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
    let s2 = sigma2_w(config.dgp.setup, config.window.0, config.window.1);
    Ok(DecompositionReport {
        h: config.h,
        estimator: config.estimator,
        mean_cv,
        se_cv,
        sigma2_w: s2,
        imse,
        se_imse,
        difference: mean_cv - (s2 + imse),
        se_difference: se_cv.hypot(se_imse),
        reps: draws.len(),
        failures,
    })
}
