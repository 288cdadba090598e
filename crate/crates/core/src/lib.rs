//! Kernel regression for clustered data.
//!
//! The crate covers marginal and within-cluster pair density estimation,
//! Nadaraya-Watson and local linear fits with leave-one-cluster-out variants,
//! rule-of-thumb and cross-validated bandwidths, and confidence intervals whose
//! standard errors account for within-cluster dependence.
//!
//! ```
//! use clusterkr::{Cluster, ClusteredDataset, Estimator, KernelSpec};
//!
//! let clusters = (0..4)
//!     .map(|g| Cluster {
//!         id: format!("c{g}"),
//!         y: (0..5).map(|j| 1.0 + 2.0 * (g * 5 + j) as f64 / 20.0).collect(),
//!         x: (0..5).map(|j| vec![(g * 5 + j) as f64 / 20.0]).collect(),
//!     })
//!     .collect();
//! let ds = ClusteredDataset::from_clusters(clusters, 1, 0).unwrap();
//! let fit = clusterkr::fit(&ds, &KernelSpec::EPANECHNIKOV, Estimator::Ll, 0.3, &[0.5]).unwrap();
//! assert!((fit.estimate - 2.0).abs() < 1e-10);
//! ```

pub mod bandwidth;
pub mod dataset;
pub mod density;
pub mod error;
pub mod inference;
pub mod kernels;
mod linalg;
pub mod regress;
pub mod variance;

pub use bandwidth::{
    aimse_h0, cv_criterion, cv_select, default_grid, global_poly4, global_poly4_loco, poly4_residuals,
    reference_h, rot, undersmooth, BandwidthMethod, BandwidthReport, CvMode, PolyFit4,
    WeightWindow,
};
pub use dataset::{Cluster, ClusterSizeSummary, ClusteredDataset, ColumnSchema};
pub use density::{density, joint_density_pairs, DensityEstimate, JointDensityEstimate};
pub use error::{Error, ErrorKind, Result};
pub use inference::{
    make_band, make_bands, normal_quantile, se_cr, se_iid, se_lambda, two_sided_z, BandConfig, CovMethod, InferenceBand,
    Interval,
};
pub use kernels::{KernelName, KernelSpec};
pub use regress::{
    fit, fit_excluding, fit_loco, ll_fit, nw_fit, residuals, residuals_near, Estimator,
    Exclusion, FitResult, ResidualSet, ResidualVariant,
};
pub use variance::{
    cond_cov_nw, cond_var_nw, conditional_normal_density, lambda_hat, nonparametric_cov_term,
    pair_moments, parametric_cov_term, CovMethodTag, CovTermEstimate, LambdaHat, MvnMoments,
};
