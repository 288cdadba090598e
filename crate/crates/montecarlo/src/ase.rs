use clusterkr::{
    cv_select, default_grid, fit, reference_h, rot, BandwidthMethod, ClusteredDataset, CvMode,
    Error, Estimator, KernelSpec, Result, WeightWindow,
};
use serde::Serialize;

use crate::dgp::{generate, DgpConfig};
use crate::replicate::{as_display, mean_se, replicate, FailurePolicy};
use crate::truth::true_m;

#[derive(Debug, Clone, PartialEq)]
pub struct AseConfig {
    pub dgp: DgpConfig,
    pub methods: Vec<BandwidthMethod>,
    pub estimator: Estimator,
    pub kernel: KernelSpec,
    /// Weight window for the selectors and the range of the ASE grid.
    pub window: (f64, f64),
    pub reps: usize,
    /// Points in the evenly spaced ASE grid, endpoints included.
    pub grid_n: usize,
    /// Candidates in the cross-validation grid around the CR-ROT bandwidth.
    pub cv_grid_n: usize,
    pub cv_span: (f64, f64),
    pub policy: FailurePolicy,
}

impl AseConfig {
    /// The four selectors, local linear fits, Epanechnikov kernel and the
    /// setup's window.
    pub fn new(dgp: DgpConfig, reps: usize) -> AseConfig {
        AseConfig {
            dgp,
            methods: vec![
                BandwidthMethod::Rot,
                BandwidthMethod::CrRot,
                BandwidthMethod::Cv,
                BandwidthMethod::CrCv,
            ],
            estimator: Estimator::Ll,
            kernel: KernelSpec::EPANECHNIKOV,
            window: dgp.setup.window(),
            reps,
            grid_n: 50,
            cv_grid_n: 50,
            cv_span: (1.0 / 3.0, 3.0),
            policy: FailurePolicy::Abort,
        }
    }

    fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no bandwidth methods requested".into()));
        }
        if let Some(m) = self
            .methods
            .iter()
            .find(|m| matches!(m, BandwidthMethod::Aimse))
        {
            return Err(Error::InvalidArgument(format!(
                "method '{m}' needs supplied constants and cannot be simulated"
            )));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidArgument("the ASE grid needs at least two points".into()));
        }
        WeightWindow::interval(self.window.0, self.window.1)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AseRecord {
    #[serde(serialize_with = "as_display")]
    pub method: BandwidthMethod,
    pub mean_ase: f64,
    pub se_ase: f64,
    pub mean_h: f64,
    pub se_h: f64,
    pub reps: usize,
    pub failures: usize,
}

/// `(1/K) Σ_k (m̂(u_k) - m(u_k))²` over `K` evenly spaced points.
pub fn ase(ds: &ClusteredDataset, config: &AseConfig, h: f64) -> Result<f64> {
    let (lo, hi) = config.window;
    let k = config.grid_n;
    let mut sum = 0.0;
    for i in 0..k {
        let u = if i + 1 == k {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (k - 1) as f64
        };
        let m_hat = fit(ds, &config.kernel, config.estimator, h, &[u])?.estimate;
        sum += (m_hat - true_m(config.dgp.setup, u)).powi(2);
    }
    Ok(sum / k as f64)
}

fn select(ds: &ClusteredDataset, config: &AseConfig) -> Result<Vec<(f64, f64)>> {
    let window = WeightWindow::interval(config.window.0, config.window.1)?;
    let k = &config.kernel;
    let cr_rot = rot(ds, k, &window, true)?.h;
    let grid = default_grid(cr_rot, config.cv_grid_n, config.cv_span)?;
    config
        .methods
        .iter()
        .map(|&m| {
            let h = match m {
                BandwidthMethod::Rot => rot(ds, k, &window, false)?.h,
                BandwidthMethod::CrRot => cr_rot,
                BandwidthMethod::Cv => {
                    cv_select(ds, k, config.estimator, &window, CvMode::LeaveOneOut, &grid)?.h
                }
                BandwidthMethod::CrCv => {
                    cv_select(ds, k, config.estimator, &window, CvMode::LeaveOneClusterOut, &grid)?.h
                }
                BandwidthMethod::Reference => reference_h(ds)?,
                BandwidthMethod::Aimse => unreachable!("rejected by validation"),
            };
            Ok((ase(ds, config, h).map_err(|e| e.context(format!("ASE for {m}")))?, h))
        })
        .collect()
}

/// Mean ASE and mean selected bandwidth for each method.
pub fn run_ase_table(config: &AseConfig) -> Result<Vec<AseRecord>> {
    config.validate()?;
    let (runs, failures) = replicate(config.reps, config.policy, |r| {
        select(&generate(&config.dgp, r)?, config)
    })?;
    Ok(config
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let ases: Vec<f64> = runs.iter().map(|r| r[j].0).collect();
            let hs: Vec<f64> = runs.iter().map(|r| r[j].1).collect();
            let (mean_ase, se_ase) = mean_se(&ases);
            let (mean_h, se_h) = mean_se(&hs);
            AseRecord {
                method,
                mean_ase,
                se_ase,
                mean_h,
                se_h,
                reps: runs.len(),
                failures,
            }
        })
        .collect())
}
