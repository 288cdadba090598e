//! Conditional variance and within-cluster covariance of the errors, and the
//! covariance term that enters the cluster-robust standard error.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{ClusterSizeSummary, ClusteredDataset};
use crate::density::{check_pair_point, check_point, weighted_pairs};
use crate::error::{check_bandwidth, Error, Result};
use crate::kernels::KernelSpec;
use crate::regress::ResidualSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaHat {
    pub value: f64,
    pub h_used: f64,
    /// `(1/n) Σ n_g²`
    pub mean_sq_size: f64,
}

/// `((1/n) Σ n_g²) h^{d_ind}`.
pub fn lambda_hat(summary: &ClusterSizeSummary, h: f64, d_ind: usize) -> Result<LambdaHat> {
    check_bandwidth("h", h)?;
    if summary.n == 0 {
        return Err(Error::NoObservations);
    }
    let mean_sq_size = summary.mean_sq_size();
    Ok(LambdaHat {
        value: mean_sq_size * h.powi(d_ind as i32),
        h_used: h,
        mean_sq_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovMethodTag {
    Nonparametric,
    ParametricCompromise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovTermEstimate {
    pub value: f64,
    pub method: CovMethodTag,
}

/// Kernel-weighted mean of squared residuals at `x`.
pub fn cond_var_nw(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    h: f64,
    x: &[f64],
    residuals: &ResidualSet,
) -> Result<f64> {
    check_bandwidth("h", h)?;
    check_point(ds, x)?;
    residuals.check_len(ds)?;
    let (mut sw, mut swe) = (0.0, 0.0);
    for &i in ds.window(x[0], h * kernel.support_radius) {
        let w = kernel.scaled(ds.row(i), x, h);
        if w > 0.0 {
            let e = residuals.require(i)?;
            sw += w;
            swe += w * e * e;
        }
    }
    if !(sw > 0.0) {
        return Err(Error::EmptyWindow { x: x.to_vec() });
    }
    Ok(swe / sw)
}

/// Kernel-weighted mean of within-cluster residual products `e_j e_l` over
/// pairs near `(x_ind, x_ind; x_cls)`.
pub fn cond_cov_nw(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    b: f64,
    x_ind: &[f64],
    x_cls: &[f64],
    residuals: &ResidualSet,
) -> Result<CovTermEstimate> {
    check_bandwidth("b", b)?;
    check_pair_point(ds, x_ind, x_cls)?;
    residuals.check_len(ds)?;
    let (mut sw, mut swe) = (0.0, 0.0);
    for (j, l, w) in weighted_pairs(ds, kernel, b, x_ind, x_cls) {
        sw += w;
        swe += w * residuals.require(j)? * residuals.require(l)?;
    }
    if !(sw > 0.0) {
        let mut x = x_ind.to_vec();
        x.extend_from_slice(x_cls);
        return Err(Error::EmptyWindow { x });
    }
    Ok(CovTermEstimate {
        value: swe / sw,
        method: CovMethodTag::Nonparametric,
    })
}

/// `λ̂ R_k^{d_cls} f̂₂ σ̂(x, x) / f̂(x)²` with both pair quantities estimated
/// nonparametrically at bandwidth `b`.
#[allow(clippy::too_many_arguments)]
pub fn nonparametric_cov_term(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    b: f64,
    x_ind: &[f64],
    x_cls: &[f64],
    residuals: &ResidualSet,
    lambda: &LambdaHat,
    fhat: f64,
) -> Result<CovTermEstimate> {
    check_density(fhat)?;
    let f2 = crate::density::joint_density_pairs(ds, kernel, b, x_ind, x_cls)?;
    if f2.value == 0.0 {
        // f̂₂ σ̂ is a kernel sum over pairs; with no pair near x it is zero.
        return Ok(CovTermEstimate {
            value: 0.0,
            method: CovMethodTag::Nonparametric,
        });
    }
    let cov = cond_cov_nw(ds, kernel, b, x_ind, x_cls, residuals)?;
    Ok(CovTermEstimate {
        value: lambda.value * kernel.r_k_pow(ds.d_cls()) * f2.value * cov.value / (fhat * fhat),
        method: CovMethodTag::Nonparametric,
    })
}

pub(crate) fn check_density(fhat: f64) -> Result<()> {
    if !(fhat > 0.0 && fhat.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "density estimate must be positive, got {fhat}"
        )));
    }
    Ok(())
}

/// Normal moments of the individual-level coordinates of two members of the
/// same cluster: `(X_j, X_l) ~ N((μ₁, μ₁), [[Σ₁₁, Σ₁₂], [Σ₁₂ᵀ, Σ₁₁]])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnMoments {
    pub mu1: DVector<f64>,
    pub sigma11: DMatrix<f64>,
    pub sigma12: DMatrix<f64>,
}

/// Sample moments over all ordered within-cluster pairs `j != l`, with the
/// pair count as denominator.
pub fn pair_moments(ds: &ClusteredDataset) -> Result<MvnMoments> {
    let p = ds.d_ind();
    let mut count = 0u64;
    let mut mu = DVector::zeros(p);
    for g in 0..ds.num_clusters() {
        let r = ds.cluster_range(g);
        let m = r.len() as u64;
        if m < 2 {
            continue;
        }
        count += m * (m - 1);
        for i in r {
            let x = DVector::from_column_slice(&ds.row(i)[..p]);
            mu += x * (m - 1) as f64;
        }
    }
    if count == 0 {
        return Err(Error::NoPairs);
    }
    mu /= count as f64;
    let mut s11 = DMatrix::zeros(p, p);
    let mut s12 = DMatrix::zeros(p, p);
    for g in 0..ds.num_clusters() {
        let r = ds.cluster_range(g);
        let m = r.len();
        if m < 2 {
            continue;
        }
        let centered: Vec<DVector<f64>> = r
            .map(|i| DVector::from_column_slice(&ds.row(i)[..p]) - &mu)
            .collect();
        for (a, xa) in centered.iter().enumerate() {
            s11 += xa * xa.transpose() * (m - 1) as f64;
            for (b, xb) in centered.iter().enumerate() {
                if a != b {
                    s12 += xa * xb.transpose();
                }
            }
        }
    }
    s11 /= count as f64;
    s12 /= count as f64;
    Ok(MvnMoments {
        mu1: mu,
        sigma11: s11,
        sigma12: s12,
    })
}

/// Density of the first pair coordinate at `x1` given the second at `x2`.
pub fn conditional_normal_density(m: &MvnMoments, x1: &[f64], x2: &[f64]) -> Result<f64> {
    let p = m.mu1.len();
    if x1.len() != p || x2.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x1.len().max(x2.len()),
        });
    }
    let chol = m
        .sigma11
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("pair covariance block is not positive definite".into()))?;
    let d2 = DVector::from_column_slice(x2) - &m.mu1;
    let mean = &m.mu1 + &m.sigma12 * chol.solve(&d2);
    let cov = &m.sigma11 - &m.sigma12 * chol.solve(&m.sigma12.transpose());
    let cov = (&cov + cov.transpose()) * 0.5;
    let cchol = cov
        .cholesky()
        .ok_or_else(|| Error::Singular("conditional covariance is not positive definite".into()))?;
    let r = DVector::from_column_slice(x1) - mean;
    let quad = r.dot(&cchol.solve(&r));
    let log_det: f64 = cchol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let log_norm = -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    Ok((log_norm - 0.5 * quad).exp())
}

/// Mean of `e_j e_l` over unordered within-cluster pairs.
pub(crate) fn mean_pair_product(ds: &ClusteredDataset, e: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0u64;
    for g in 0..ds.num_clusters() {
        let r = ds.cluster_range(g);
        for j in r.clone() {
            for l in j + 1..r.end {
                sum += e[j] * e[l];
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoPairs);
    }
    Ok(sum / count as f64)
}

/// `λ̂ R_k^{d_cls} (mean pair product of e) p(x | x) / f̂(x)`, the covariance
/// term under jointly normal pair regressors and homoskedastic within-cluster
/// covariance. `residuals` are usually the global quartic pilot residuals.
pub fn parametric_cov_term(
    ds: &ClusteredDataset,
    residuals: &ResidualSet,
    lambda: &LambdaHat,
    r_k: f64,
    x_ind: &[f64],
    fhat: f64,
) -> Result<CovTermEstimate> {
    check_density(fhat)?;
    residuals.check_len(ds)?;
    let e = residuals.complete().ok_or_else(|| {
        Error::InvalidArgument("the parametric covariance term needs every residual".into())
    })?;
    let mean_ee = mean_pair_product(ds, &e)?;
    let moments = pair_moments(ds)?;
    let p = conditional_normal_density(&moments, x_ind, x_ind)?;
    Ok(CovTermEstimate {
        value: lambda.value * r_k.powi(ds.d_cls() as i32) * mean_ee * p / fhat,
        method: CovMethodTag::ParametricCompromise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Cluster;
    use crate::regress::ResidualVariant;

    fn ds(groups: &[&[f64]]) -> ClusteredDataset {
        let clusters = groups
            .iter()
            .enumerate()
            .map(|(g, xs)| Cluster {
                id: g.to_string(),
                y: vec![0.0; xs.len()],
                x: xs.iter().map(|&v| vec![v]).collect(),
            })
            .collect();
        ClusteredDataset::from_clusters(clusters, 1, 0).unwrap()
    }

    fn res(v: Vec<f64>) -> ResidualSet {
        ResidualSet::new(ResidualVariant::Fitted, v)
    }

    #[test]
    fn variance_hand_values() {
        let d = ds(&[&[0.0, 0.1], &[0.2, 0.3]]);
        let k = KernelSpec::EPANECHNIKOV;
        let e = res(vec![0.5, -0.5, 0.5, -0.5]);
        assert!((cond_var_nw(&d, &k, 1.0, &[0.1], &e).unwrap() - 0.25).abs() < 1e-15);
        let zero = res(vec![0.0; 4]);
        assert_eq!(cond_var_nw(&d, &k, 1.0, &[0.1], &zero).unwrap(), 0.0);
    }

    #[test]
    fn covariance_hand_values() {
        let d = ds(&[&[0.0, 0.1], &[0.2, 0.3]]);
        let k = KernelSpec::EPANECHNIKOV;
        let same = res(vec![0.3; 4]);
        let c = cond_cov_nw(&d, &k, 1.0, &[0.1], &[], &same).unwrap();
        assert!((c.value - 0.09).abs() < 1e-15);
        let alt = res(vec![0.3, -0.3, 0.3, -0.3]);
        let c = cond_cov_nw(&d, &k, 1.0, &[0.1], &[], &alt).unwrap();
        assert!((c.value + 0.09).abs() < 1e-15);
    }

    #[test]
    fn singletons_fail_loudly() {
        let d = ds(&[&[0.0], &[0.5], &[1.0]]);
        let k = KernelSpec::EPANECHNIKOV;
        let e = res(vec![0.1, 0.2, 0.3]);
        assert!(matches!(cond_cov_nw(&d, &k, 1.0, &[0.5], &[], &e), Err(Error::NoPairs)));
        let lam = lambda_hat(&d.size_summary(), 0.5, 1).unwrap();
        assert!(matches!(
            parametric_cov_term(&d, &e, &lam, 0.6, &[0.5], 1.0),
            Err(Error::NoPairs)
        ));
    }

    #[test]
    fn lambda_values() {
        let s = ClusterSizeSummary {
            n: 2000,
            clusters: 100,
            max_ng: 20,
            sum_ng_sq: 40000,
            mean_ng: 20.0,
        };
        assert_eq!(lambda_hat(&s, 0.25, 1).unwrap().value, 5.0);
        let s = ClusterSizeSummary {
            n: 2080,
            clusters: 100,
            max_ng: 100,
            sum_ng_sq: 49600,
            mean_ng: 20.8,
        };
        let l = lambda_hat(&s, 0.5, 1).unwrap();
        assert_eq!(l.value, 49600.0 / 2080.0 * 0.5);
        assert!(lambda_hat(&s, 0.0, 1).is_err());
    }

    #[test]
    fn independent_pairs_reduce_to_marginal() {
        let m = MvnMoments {
            mu1: DVector::from_vec(vec![0.5]),
            sigma11: DMatrix::from_vec(1, 1, vec![2.0]),
            sigma12: DMatrix::zeros(1, 1),
        };
        let p = conditional_normal_density(&m, &[1.0], &[1.0]).unwrap();
        let expected = (-(0.25) / 4.0f64).exp() / (2.0 * std::f64::consts::PI * 2.0).sqrt();
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_residuals_zero_term() {
        let d = ds(&[&[0.0, 0.4, 1.1], &[0.2, 0.9, -0.3], &[0.5, 0.7]]);
        let lam = lambda_hat(&d.size_summary(), 0.3, 1).unwrap();
        let t = parametric_cov_term(&d, &res(vec![0.0; 8]), &lam, 0.6, &[0.5], 0.4).unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.method, CovMethodTag::ParametricCompromise);
    }
}
