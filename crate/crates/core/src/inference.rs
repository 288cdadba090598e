//! Standard errors and pointwise confidence intervals.
//!
//! Three intervals are produced at each point: one treating observations as
//! independent, one using leave-one-cluster-out residuals, and one that adds
//! the within-cluster covariance term scaled by `λ̂`.

use crate::bandwidth::poly4_residuals;
use crate::dataset::ClusteredDataset;
use crate::density::{check_point, density};
use crate::error::{check_bandwidth, Error, Result};
use crate::kernels::KernelSpec;
use crate::regress::{fit, residuals_near, Estimator, ResidualSet, ResidualVariant};
use crate::variance::{
    check_density, cond_var_nw, lambda_hat, nonparametric_cov_term, parametric_cov_term,
    CovMethodTag, CovTermEstimate,
};

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    133.141_667_891_784_38,
    1_971.590_950_306_551_4,
    13_731.693_765_509_461,
    45_921.953_931_549_87,
    67_265.770_927_008_7,
    33_430.575_583_588_128,
    2_509.080_928_730_122_7,
];
const B: [f64; 8] = [
    1.0,
    42.313_330_701_600_91,
    687.187_007_492_057_9,
    5_394.196_021_424_751,
    21_213.794_301_586_596,
    39_307.895_800_092_71,
    28_729.085_735_721_943,
    5_226.495_278_852_546,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_545,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    0.241_780_725_177_450_6,
    0.022_723_844_989_269_184,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    0.689_767_334_985_1,
    0.148_103_976_427_480_07,
    0.015_198_666_563_616_457,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_8e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    0.296_560_571_828_504_9,
    0.026_532_189_526_576_124,
    0.001_242_660_947_388_078_4,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    0.599_832_206_555_887_9,
    0.136_929_880_922_735_8,
    0.014_875_361_290_850_615,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

fn horner(c: &[f64; 8], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * r + v)
}

/// Lower-tail standard normal quantile (Wichura's AS 241, about 1e-16
/// relative accuracy).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * horner(&A, r) / horner(&B, r));
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        horner(&C, r - 1.6) / horner(&D, r - 1.6)
    } else {
        horner(&E, r - 5.0) / horner(&F, r - 5.0)
    };
    Ok(if q < 0.0 { -val } else { val })
}

/// `z_{1 - α/2}`.
pub fn two_sided_z(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "significance level must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(match alpha {
        a if a == 0.10 => 1.644_853_626_951_472_2,
        a if a == 0.05 => 1.959_963_984_540_054,
        a if a == 0.01 => 2.575_829_303_548_900_4,
        a => normal_quantile(1.0 - a / 2.0)?,
    })
}

fn check_se_inputs(fhat: f64, n: usize, h: f64) -> Result<()> {
    check_density(fhat)?;
    check_bandwidth("h", h)?;
    if n == 0 {
        return Err(Error::NoObservations);
    }
    Ok(())
}

/// `sqrt(R_k^d σ² / (n h^d f̂))`.
pub fn se_iid(r_k: f64, d: usize, sigma2: f64, fhat: f64, n: usize, h: f64) -> Result<f64> {
    check_se_inputs(fhat, n, h)?;
    let v = r_k.powi(d as i32) * sigma2 / (n as f64 * h.powi(d as i32) * fhat);
    Ok(v.max(0.0).sqrt())
}

/// Same form as [`se_iid`]; `sigma2_jack` comes from leave-one-cluster-out
/// residuals.
pub fn se_cr(r_k: f64, d: usize, sigma2_jack: f64, fhat: f64, n: usize, h: f64) -> Result<f64> {
    se_iid(r_k, d, sigma2_jack, fhat, n, h)
}

/// `sqrt((R_k^d σ̃² / f̂ + cov) / (n h^d))` where `cov` is the covariance term
/// (already divided by `f̂²`). A negative total falls back to the term without
/// `cov`; the flag reports whether that happened.
pub fn se_lambda(
    r_k: f64,
    d: usize,
    sigma2_jack: f64,
    cov: &CovTermEstimate,
    fhat: f64,
    n: usize,
    h: f64,
) -> Result<(f64, bool)> {
    check_se_inputs(fhat, n, h)?;
    let base = r_k.powi(d as i32) * sigma2_jack / fhat;
    let total = base + cov.value;
    let scale = n as f64 * h.powi(d as i32);
    if total < 0.0 {
        Ok(((base / scale).max(0.0).sqrt(), true))
    } else {
        Ok(((total / scale).sqrt(), false))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn around(center: f64, z: f64, se: f64) -> Interval {
        Interval {
            lo: center - z * se,
            hi: center + z * se,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// How the within-cluster covariance term is estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovMethod {
    /// Normal pair density and leave-one-cluster-out global quartic
    /// residuals. Needs a single regressor.
    Parametric,
    /// Kernel pair density and pair covariance at bandwidth `b` (defaults to
    /// `h_f`).
    Nonparametric { b: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandConfig {
    pub kernel: KernelSpec,
    pub estimator: Estimator,
    /// Regression bandwidth; also used for the residuals and `λ̂`.
    pub h_m: f64,
    /// Density bandwidth.
    pub h_f: f64,
    /// Bandwidth for smoothing squared residuals.
    pub h_sigma2: f64,
    pub alpha: f64,
    pub cov_method: CovMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceBand {
    pub x: Vec<f64>,
    pub estimate: f64,
    pub fhat: f64,
    pub sigma2: f64,
    pub sigma2_jack: f64,
    pub lambda: f64,
    pub cov_term: f64,
    pub se_iid: f64,
    pub se_cr: f64,
    pub se_lambda: f64,
    pub ci_iid: Interval,
    pub ci_cr: Interval,
    pub ci_lambda: Interval,
    pub h_m: f64,
    pub h_f: f64,
    pub h_sigma2: f64,
    pub warnings: Vec<String>,
}

impl BandConfig {
    fn validate(&self, ds: &ClusteredDataset) -> Result<()> {
        check_bandwidth("h_m", self.h_m)?;
        check_bandwidth("h_f", self.h_f)?;
        check_bandwidth("h_sigma2", self.h_sigma2)?;
        two_sided_z(self.alpha)?;
        match self.cov_method {
            CovMethod::Parametric if ds.d() != 1 => Err(Error::InvalidArgument(
                "the parametric covariance term needs a single regressor; use the nonparametric method".into(),
            )),
            CovMethod::Nonparametric { b: Some(b) } => check_bandwidth("b", b),
            _ => Ok(()),
        }
    }
}

/// Band at a single point.
pub fn make_band(ds: &ClusteredDataset, cfg: &BandConfig, x: &[f64]) -> Result<InferenceBand> {
    make_bands(ds, cfg, &[x.to_vec()]).map(|mut v| v.remove(0))
}

/// Bands at several points; quantities that do not depend on the point are
/// computed once.
pub fn make_bands(ds: &ClusteredDataset, cfg: &BandConfig, xs: &[Vec<f64>]) -> Result<Vec<InferenceBand>> {
    cfg.validate(ds)?;
    if ds.is_empty() {
        return Err(Error::NoObservations);
    }
    let pilot = match cfg.cov_method {
        CovMethod::Parametric => {
            Some(poly4_residuals(ds, true).map_err(|e| e.context("covariance pilot residuals"))?)
        }
        CovMethod::Nonparametric { .. } => None,
    };
    let lambda = lambda_hat(&ds.size_summary(), cfg.h_m, ds.d_ind())?;
    xs.iter()
        .map(|x| band_at(ds, cfg, x, pilot.as_ref(), lambda))
        .collect()
}

fn band_at(
    ds: &ClusteredDataset,
    cfg: &BandConfig,
    x: &[f64],
    pilot: Option<&ResidualSet>,
    lambda: crate::variance::LambdaHat,
) -> Result<InferenceBand> {
    check_point(ds, x)?;
    let at = |what: &str| format!("{what} at x = {x:?}");
    let kernel = &cfg.kernel;
    let d = ds.d();
    let n = ds.n();
    let estimate = fit(ds, kernel, cfg.estimator, cfg.h_m, x)
        .map_err(|e| e.context(at("regression estimate")))?
        .estimate;
    let fhat = density(ds, kernel, cfg.h_f, x)?.value;
    if !(fhat > 0.0) {
        return Err(Error::EmptyWindow { x: x.to_vec() }.context(at("density estimate")));
    }
    let b = match cfg.cov_method {
        CovMethod::Nonparametric { b } => Some(b.unwrap_or(cfg.h_f)),
        CovMethod::Parametric => None,
    };
    let radius = cfg.h_sigma2.max(b.unwrap_or(0.0)) * kernel.support_radius;
    let fitted = residuals_near(ds, kernel, cfg.h_m, cfg.estimator, ResidualVariant::Fitted, x, radius)
        .map_err(|e| e.context(at("fitted residuals")))?;
    let jack = residuals_near(ds, kernel, cfg.h_m, cfg.estimator, ResidualVariant::Jackknife, x, radius)
        .map_err(|e| e.context(at("jackknife residuals")))?;
    let sigma2 = cond_var_nw(ds, kernel, cfg.h_sigma2, x, &fitted)
        .map_err(|e| e.context(at("conditional variance")))?;
    let sigma2_jack = cond_var_nw(ds, kernel, cfg.h_sigma2, x, &jack)
        .map_err(|e| e.context(at("jackknife conditional variance")))?;
    let cov = match (cfg.cov_method, pilot) {
        (CovMethod::Parametric, Some(pilot)) => {
            parametric_cov_term(ds, pilot, &lambda, kernel.r_k, &x[..ds.d_ind()], fhat)
        }
        _ => nonparametric_cov_term(
            ds,
            kernel,
            b.unwrap_or(cfg.h_f),
            &x[..ds.d_ind()],
            &x[ds.d_ind()..],
            &fitted,
            &lambda,
            fhat,
        ),
    };
    let mut warnings = Vec::new();
    let cov = match cov {
        Err(Error::NoPairs) => {
            warnings.push("no cluster has two or more members; the covariance term is zero".to_string());
            CovTermEstimate {
                value: 0.0,
                method: match cfg.cov_method {
                    CovMethod::Parametric => CovMethodTag::ParametricCompromise,
                    CovMethod::Nonparametric { .. } => CovMethodTag::Nonparametric,
                },
            }
        }
        other => other.map_err(|e| e.context(at("covariance term")))?,
    };

    let se_i = se_iid(kernel.r_k, d, sigma2, fhat, n, cfg.h_m)?;
    let se_c = se_cr(kernel.r_k, d, sigma2_jack, fhat, n, cfg.h_m)?;
    let (se_l, clamped) = se_lambda(kernel.r_k, d, sigma2_jack, &cov, fhat, n, cfg.h_m)?;
    if clamped {
        warnings.push(format!(
            "estimated variance with the covariance term is negative at x = {x:?}; using the cluster-robust term alone"
        ));
    }
    let z = two_sided_z(cfg.alpha)?;
    Ok(InferenceBand {
        x: x.to_vec(),
        estimate,
        fhat,
        sigma2,
        sigma2_jack,
        lambda: lambda.value,
        cov_term: cov.value,
        se_iid: se_i,
        se_cr: se_c,
        se_lambda: se_l,
        ci_iid: Interval::around(estimate, z, se_i),
        ci_cr: Interval::around(estimate, z, se_c),
        ci_lambda: Interval::around(estimate, z, se_l),
        h_m: cfg.h_m,
        h_f: cfg.h_f,
        h_sigma2: cfg.h_sigma2,
        warnings,
    })
}
