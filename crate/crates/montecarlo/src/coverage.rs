use std::fmt;
use std::str::FromStr;

use clusterkr::{
    cv_select, default_grid, make_band, reference_h, rot, undersmooth, BandConfig, CovMethod,
    CvMode, Error, Estimator, Interval, KernelSpec, Result, WeightWindow,
};
use serde::Serialize;

use crate::dgp::{generate, DgpConfig};
use crate::replicate::{as_display, mean_se, replicate, FailurePolicy};
use crate::truth::{true_bias, true_m};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CiVariant {
    Iid,
    Cr,
    Lambda,
}

impl CiVariant {
    pub const ALL: [CiVariant; 3] = [CiVariant::Iid, CiVariant::Cr, CiVariant::Lambda];

    pub fn as_str(self) -> &'static str {
        match self {
            CiVariant::Iid => "iid",
            CiVariant::Cr => "cr",
            CiVariant::Lambda => "lambda",
        }
    }
}

impl fmt::Display for CiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CiVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<CiVariant> {
        CiVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown interval variant '{s}'")))
    }
}

/// How the smoothing bias is handled before checking coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BiasMode {
    /// `h_m = h_CR-CV · n^{1/5 - 2/7}`.
    Undersmooth,
    /// `h_m = h_CR-CV` and intervals shifted by the true leading bias.
    InfeasibleCorrect,
    /// `h_m = h_CR-CV`, bias left in.
    Ignore,
}

impl BiasMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasMode::Undersmooth => "undersmooth",
            BiasMode::InfeasibleCorrect => "infeasible-correct",
            BiasMode::Ignore => "ignore",
        }
    }
}

impl fmt::Display for BiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<BiasMode> {
        [BiasMode::Undersmooth, BiasMode::InfeasibleCorrect, BiasMode::Ignore]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bias mode '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub dgp: DgpConfig,
    pub x_eval: f64,
    pub variants: Vec<CiVariant>,
    pub estimator: Estimator,
    pub kernel: KernelSpec,
    pub alpha: f64,
    pub bias_mode: BiasMode,
    pub cov_method: CovMethod,
    /// Weight window for the cross-validated bandwidth.
    pub window: (f64, f64),
    pub cv_grid_n: usize,
    pub cv_span: (f64, f64),
    pub reps: usize,
    pub policy: FailurePolicy,
}

impl CoverageConfig {
    /// All three intervals at level 95%, local linear fits, undersmoothing
    /// and the parametric covariance term.
    pub fn new(dgp: DgpConfig, x_eval: f64, reps: usize) -> CoverageConfig {
        CoverageConfig {
            dgp,
            x_eval,
            variants: CiVariant::ALL.to_vec(),
            estimator: Estimator::Ll,
            kernel: KernelSpec::EPANECHNIKOV,
            alpha: 0.05,
            bias_mode: BiasMode::Undersmooth,
            cov_method: CovMethod::Parametric,
            window: dgp.setup.window(),
            cv_grid_n: 50,
            cv_span: (1.0 / 3.0, 3.0),
            reps,
            policy: FailurePolicy::Abort,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRecord {
    #[serde(serialize_with = "as_display")]
    pub ci_variant: CiVariant,
    pub x_eval: f64,
    pub coverage: f64,
    /// Binomial standard error of `coverage`.
    pub se_coverage: f64,
    pub mean_length: f64,
    pub se_length: f64,
    pub mean_h_m: f64,
    pub reps: usize,
    pub failures: usize,
}

struct Draw {
    covered: [bool; 3],
    length: [f64; 3],
    h_m: f64,
}

fn one_draw(config: &CoverageConfig, r: u64) -> Result<Draw> {
    let ds = generate(&config.dgp, r)?;
    let window = WeightWindow::interval(config.window.0, config.window.1)?;
    let k = config.kernel;
    let center = rot(&ds, &k, &window, true)?.h;
    let grid = default_grid(center, config.cv_grid_n, config.cv_span)?;
    let h_cv = cv_select(&ds, &k, config.estimator, &window, CvMode::LeaveOneClusterOut, &grid)?.h;
    let h_m = match config.bias_mode {
        BiasMode::Undersmooth => undersmooth(h_cv, ds.n())?,
        BiasMode::InfeasibleCorrect | BiasMode::Ignore => h_cv,
    };
    let h_f = reference_h(&ds)?;
    let cfg = BandConfig {
        kernel: k,
        estimator: config.estimator,
        h_m,
        h_f,
        h_sigma2: h_f,
        alpha: config.alpha,
        cov_method: config.cov_method,
    };
    let band = make_band(&ds, &cfg, &[config.x_eval])?;
    let shift = match config.bias_mode {
        BiasMode::InfeasibleCorrect => {
            -h_m * h_m * true_bias(config.dgp.setup, config.estimator, config.x_eval, &k)
        }
        _ => 0.0,
    };
    let truth = true_m(config.dgp.setup, config.x_eval);
    let moved = |ci: Interval| Interval {
        lo: ci.lo + shift,
        hi: ci.hi + shift,
    };
    let cis = [band.ci_iid, band.ci_cr, band.ci_lambda].map(moved);
    Ok(Draw {
        covered: cis.map(|ci| ci.contains(truth)),
        length: cis.map(|ci| ci.length()),
        h_m,
    })
}

/// Coverage of `m(x_eval)` and mean length for each interval variant.
pub fn run_coverage_table(config: &CoverageConfig) -> Result<Vec<CoverageRecord>> {
    config.dgp.validate()?;
    if config.variants.is_empty() {
        return Err(Error::InvalidArgument("no interval variants requested".into()));
    }
    let (draws, failures) = replicate(config.reps, config.policy, |r| one_draw(config, r))?;
    let m = draws.len() as f64;
    let (mean_h_m, _) = mean_se(&draws.iter().map(|d| d.h_m).collect::<Vec<_>>());
    Ok(config
        .variants
        .iter()
        .map(|&v| {
            let j = v as usize;
            let coverage = draws.iter().filter(|d| d.covered[j]).count() as f64 / m;
            let (mean_length, se_length) = mean_se(&draws.iter().map(|d| d.length[j]).collect::<Vec<_>>());
            CoverageRecord {
                ci_variant: v,
                x_eval: config.x_eval,
                coverage,
                se_coverage: (coverage * (1.0 - coverage) / m).sqrt(),
                mean_length,
                se_length,
                mean_h_m,
                reps: draws.len(),
                failures,
            }
        })
        .collect())
}
