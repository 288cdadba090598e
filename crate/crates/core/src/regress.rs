//! Nadaraya-Watson and local linear regression.
//!
//! Both estimators only visit observations inside the kernel's support around
//! the evaluation point. Observations outside carry zero weight, so the result
//! equals the full-sample formula.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::ClusteredDataset;
use crate::density::check_point;
use crate::error::{check_bandwidth, Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{rcond_equilibrated, solve_spd_equilibrated, RCOND_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Nw,
    Ll,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Nw => "nw",
            Estimator::Ll => "ll",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nw" => Ok(Estimator::Nw),
            "ll" => Ok(Estimator::Ll),
            _ => Err(Error::InvalidArgument(format!(
                "unknown estimator '{s}' (expected nw or ll)"
            ))),
        }
    }
}

/// Which observations a fit ignores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    None,
    /// Every member of cluster `g`.
    Cluster(usize),
    /// The single observation at this row position.
    Observation(usize),
}

impl Exclusion {
    #[inline]
    fn skips(self, ds: &ClusteredDataset, i: usize) -> bool {
        match self {
            Exclusion::None => false,
            Exclusion::Cluster(g) => ds.cluster_of(i) == g,
            Exclusion::Observation(o) => o == i,
        }
    }

    fn validate(self, ds: &ClusteredDataset) -> Result<()> {
        match self {
            Exclusion::None => Ok(()),
            Exclusion::Cluster(g) if g >= ds.num_clusters() => Err(Error::ClusterIndex {
                index: g,
                len: ds.num_clusters(),
            }),
            Exclusion::Observation(o) if o >= ds.n() => Err(Error::InvalidArgument(format!(
                "observation index {o} out of range for {} observations",
                ds.n()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub x: Vec<f64>,
    pub estimate: f64,
    /// Nadaraya-Watson: sum of kernel weights. Local linear: reciprocal
    /// condition number of the equilibrated local design.
    pub denom: f64,
    pub n_effective: usize,
    /// Local linear fit fell back to the local constant value.
    pub nw_fallback: bool,
}

pub fn nw_fit(ds: &ClusteredDataset, kernel: &KernelSpec, h: f64, x: &[f64]) -> Result<FitResult> {
    fit_excluding(ds, kernel, Estimator::Nw, h, x, Exclusion::None)
}

/// Intercept of the kernel-weighted least-squares fit of `Y` on `(1, X - x)`.
/// A degenerate local design falls back to the Nadaraya-Watson value.
pub fn ll_fit(ds: &ClusteredDataset, kernel: &KernelSpec, h: f64, x: &[f64]) -> Result<FitResult> {
    fit_excluding(ds, kernel, Estimator::Ll, h, x, Exclusion::None)
}

pub fn fit(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    estimator: Estimator,
    h: f64,
    x: &[f64],
) -> Result<FitResult> {
    fit_excluding(ds, kernel, estimator, h, x, Exclusion::None)
}

/// Fit with cluster `g` left out. Bit-identical to fitting on
/// `ds.drop_cluster(g)`.
pub fn fit_loco(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    h: f64,
    x: &[f64],
    g: usize,
    estimator: Estimator,
) -> Result<FitResult> {
    fit_excluding(ds, kernel, estimator, h, x, Exclusion::Cluster(g))
}

pub fn fit_excluding(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    estimator: Estimator,
    h: f64,
    x: &[f64],
    exclusion: Exclusion,
) -> Result<FitResult> {
    check_bandwidth("h", h)?;
    check_point(ds, x)?;
    exclusion.validate(ds)?;
    match estimator {
        Estimator::Nw => nw_core(ds, kernel, h, x, exclusion),
        Estimator::Ll => ll_core(ds, kernel, h, x, exclusion),
    }
}

fn nw_core(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    h: f64,
    x: &[f64],
    exclusion: Exclusion,
) -> Result<FitResult> {
    let y = ds.y();
    // Responses are centred on the first in-window value, which makes
    // constant responses come back exactly.
    let mut y0 = None;
    let (mut sw, mut swy, mut count) = (0.0, 0.0, 0usize);
    for &i in ds.window(x[0], h * kernel.support_radius) {
        if exclusion.skips(ds, i) {
            continue;
        }
        let w = kernel.scaled(ds.row(i), x, h);
        if w > 0.0 {
            let y0 = *y0.get_or_insert(y[i]);
            sw += w;
            swy += w * (y[i] - y0);
            count += 1;
        }
    }
    let Some(y0) = y0 else {
        return Err(Error::EmptyWindow { x: x.to_vec() });
    };
    Ok(FitResult {
        x: x.to_vec(),
        estimate: y0 + swy / sw,
        denom: sw,
        n_effective: count,
        nw_fallback: false,
    })
}

fn ll_core(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    h: f64,
    x: &[f64],
    exclusion: Exclusion,
) -> Result<FitResult> {
    let d = ds.d();
    let y = ds.y();
    // Weighted means and co-moments about them, updated one observation at a
    // time. Fitting about the local mean rather than about `x` keeps the
    // slope system as well conditioned as the local scatter allows.
    let mut sw = 0.0;
    let mut zbar = vec![0.0; d];
    let mut ybar = 0.0;
    let mut szz = vec![0.0; d * d];
    let mut szy = vec![0.0; d];
    let mut dz = vec![0.0; d];
    let mut count = 0usize;
    for &i in ds.window(x[0], h * kernel.support_radius) {
        if exclusion.skips(ds, i) {
            continue;
        }
        let row = ds.row(i);
        let w = kernel.scaled(row, x, h);
        if w <= 0.0 {
            continue;
        }
        count += 1;
        sw += w;
        let f = w / sw;
        for q in 0..d {
            dz[q] = row[q] - x[q] - zbar[q];
            zbar[q] += dz[q] * f;
        }
        ybar += (y[i] - ybar) * f;
        let ry = y[i] - ybar;
        for r in 0..d {
            let after = row[r] - x[r] - zbar[r];
            szy[r] += w * dz[r] * ry;
            for c in r..d {
                szz[r * d + c] += w * dz[c] * after;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyWindow { x: x.to_vec() });
    }
    for r in 0..d {
        for c in 0..r {
            szz[r * d + c] = szz[c * d + r];
        }
    }
    // Degeneracy is judged on the normal matrix of the design `(1, X - x)`.
    let k = d + 1;
    let mut a = vec![0.0; k * k];
    a[0] = sw;
    for r in 0..d {
        a[r + 1] = sw * zbar[r];
        a[(r + 1) * k] = sw * zbar[r];
        for c in 0..d {
            a[(r + 1) * k + c + 1] = szz[r * d + c] + sw * zbar[r] * zbar[c];
        }
    }
    let rcond = rcond_equilibrated(&a, k);
    let slope = if rcond >= RCOND_MIN { solve_spd_equilibrated(&szz, &szy, d).1 } else { None };
    let (estimate, nw_fallback) = match slope {
        Some(beta) => (ybar - beta.iter().zip(&zbar).map(|(b, z)| b * z).sum::<f64>(), false),
        None => (ybar, true),
    };
    Ok(FitResult {
        x: x.to_vec(),
        estimate,
        denom: rcond,
        n_effective: count,
        nw_fallback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualVariant {
    /// `Y - m̂(X)` from the full-sample fit.
    Fitted,
    /// `Y - m̃_{-g}(X)` with the observation's own cluster left out.
    Jackknife,
    /// `Y - m̌_{-g}(X)` from leave-one-cluster-out global quartic fits.
    GlobalPoly4,
}

/// Residuals aligned with dataset order. Entries that were not computed are
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub variant: ResidualVariant,
    values: Vec<Option<f64>>,
}

impl ResidualSet {
    pub fn new(variant: ResidualVariant, values: Vec<f64>) -> ResidualSet {
        ResidualSet {
            variant,
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn partial(variant: ResidualVariant, values: Vec<Option<f64>>) -> ResidualSet {
        ResidualSet { variant, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied().flatten()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// All residuals, if every one was computed.
    pub fn complete(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }

    pub(crate) fn require(&self, i: usize) -> Result<f64> {
        self.get(i).ok_or_else(|| {
            Error::InvalidArgument(format!("residual for observation {i} was not computed"))
        })
    }

    pub(crate) fn check_len(&self, ds: &ClusteredDataset) -> Result<()> {
        if self.len() != ds.n() {
            return Err(Error::DimensionMismatch {
                expected: ds.n(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

fn residual_at(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    h: f64,
    estimator: Estimator,
    variant: ResidualVariant,
    i: usize,
) -> Result<f64> {
    let exclusion = match variant {
        ResidualVariant::Fitted => Exclusion::None,
        ResidualVariant::Jackknife => Exclusion::Cluster(ds.cluster_of(i)),
        ResidualVariant::GlobalPoly4 => {
            return Err(Error::InvalidArgument(
                "global quartic residuals come from the bandwidth module".into(),
            ))
        }
    };
    let x = ds.row(i);
    match estimator {
        Estimator::Nw => nw_core(ds, kernel, h, x, exclusion),
        Estimator::Ll => ll_core(ds, kernel, h, x, exclusion),
    }
    .map(|f| ds.y()[i] - f.estimate)
    .map_err(|e| Error::Prediction {
        observation: i,
        h,
        source: Box::new(e),
    })
}

pub fn residuals(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    h: f64,
    estimator: Estimator,
    variant: ResidualVariant,
) -> Result<ResidualSet> {
    check_bandwidth("h", h)?;
    let values = (0..ds.n())
        .into_par_iter()
        .map(|i| residual_at(ds, kernel, h, estimator, variant, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualSet::new(variant, values))
}

/// Residuals only for observations whose coordinates all lie within `radius`
/// of `center`; the rest are left out. Enough for local smoothing of
/// residuals around `center` with bandwidth `radius / support_radius`.
pub fn residuals_near(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    h: f64,
    estimator: Estimator,
    variant: ResidualVariant,
    center: &[f64],
    radius: f64,
) -> Result<ResidualSet> {
    check_bandwidth("h", h)?;
    check_point(ds, center)?;
    let near = |i: usize| {
        ds.row(i)
            .iter()
            .zip(center)
            .all(|(a, c)| (a - c).abs() <= radius)
    };
    let values = (0..ds.n())
        .into_par_iter()
        .map(|i| {
            if near(i) {
                residual_at(ds, kernel, h, estimator, variant, i).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualSet::partial(variant, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Cluster;

    fn ds_xy(groups: &[&[(f64, f64)]]) -> ClusteredDataset {
        let clusters = groups
            .iter()
            .enumerate()
            .map(|(g, obs)| Cluster {
                id: format!("g{g}"),
                y: obs.iter().map(|o| o.1).collect(),
                x: obs.iter().map(|o| vec![o.0]).collect(),
            })
            .collect();
        ClusteredDataset::from_clusters(clusters, 1, 0).unwrap()
    }

    #[test]
    fn nw_hand_value() {
        let ds = ds_xy(&[&[(0.0, 0.0), (1.0, 1.0)]]);
        let f = nw_fit(&ds, &KernelSpec::EPANECHNIKOV, 2.0, &[0.0]).unwrap();
        assert!((f.estimate - 0.5625 / 1.3125).abs() < 1e-15);
        assert_eq!(f.denom, 1.3125);
        assert_eq!(f.n_effective, 2);
    }

    #[test]
    fn nw_constant() {
        let ds = ds_xy(&[&[(0.0, 3.0), (0.3, 3.0)], &[(0.7, 3.0)]]);
        for x in [0.0, 0.2, 0.5, 0.9] {
            assert_eq!(nw_fit(&ds, &KernelSpec::QUARTIC, 0.5, &[x]).unwrap().estimate, 3.0);
        }
    }

    #[test]
    fn empty_window_carries_point() {
        let ds = ds_xy(&[&[(0.0, 1.0)]]);
        match nw_fit(&ds, &KernelSpec::EPANECHNIKOV, 0.1, &[2.0]) {
            Err(Error::EmptyWindow { x }) => assert_eq!(x, vec![2.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ll_affine_and_fallback() {
        let ds = ds_xy(&[&[(0.0, 2.0), (0.2, 2.6)], &[(0.5, 3.5), (0.9, 4.7)]]);
        let f = ll_fit(&ds, &KernelSpec::EPANECHNIKOV, 1.0, &[0.4]).unwrap();
        assert!((f.estimate - 3.2).abs() < 1e-12);
        assert!(!f.nw_fallback);

        let same = ds_xy(&[&[(0.5, 1.0), (0.5, 2.0)]]);
        let f = ll_fit(&same, &KernelSpec::EPANECHNIKOV, 1.0, &[0.3]).unwrap();
        let n = nw_fit(&same, &KernelSpec::EPANECHNIKOV, 1.0, &[0.3]).unwrap();
        assert!(f.nw_fallback);
        assert_eq!(f.estimate, n.estimate);
    }

    #[test]
    fn loco_matches_drop() {
        let ds = ds_xy(&[&[(0.0, 1.0), (0.2, 0.5)], &[(0.1, 2.0), (0.4, 1.5)]]);
        let k = KernelSpec::EPANECHNIKOV;
        let dropped = ds.drop_cluster(0).unwrap();
        for est in [Estimator::Nw, Estimator::Ll] {
            let a = fit_loco(&ds, &k, 1.0, &[0.2], 0, est).unwrap();
            let b = fit(&dropped, &k, est, 1.0, &[0.2]).unwrap();
            assert_eq!(a, b);
        }
        assert!(matches!(
            fit_loco(&ds, &k, 1.0, &[0.2], 5, Estimator::Nw),
            Err(Error::ClusterIndex { .. })
        ));
    }

    #[test]
    fn residual_variants() {
        let ds = ds_xy(&[&[(0.0, 1.0), (0.5, 2.0), (1.0, 3.0)]]);
        let k = KernelSpec::EPANECHNIKOV;
        let fitted = residuals(&ds, &k, 2.0, Estimator::Ll, ResidualVariant::Fitted).unwrap();
        for r in fitted.complete().unwrap() {
            assert!(r.abs() < 1e-10);
        }
        let err = residuals(&ds, &k, 2.0, Estimator::Ll, ResidualVariant::Jackknife).unwrap_err();
        assert!(matches!(err, Error::Prediction { observation: 0, .. }));
    }

    #[test]
    fn partial_residuals() {
        let ds = ds_xy(&[&[(0.0, 1.0), (0.5, 2.0)], &[(3.0, 3.0), (0.6, 0.0)]]);
        let k = KernelSpec::EPANECHNIKOV;
        let r = residuals_near(&ds, &k, 1.0, Estimator::Nw, ResidualVariant::Jackknife, &[0.5], 0.2)
            .unwrap();
        assert_eq!(r.get(0), None);
        assert!(r.get(1).is_some());
        assert_eq!(r.get(2), None);
        assert!(r.get(3).is_some());
        assert!(r.complete().is_none());
    }

    #[test]
    fn estimator_names() {
        assert_eq!("ll".parse::<Estimator>().unwrap(), Estimator::Ll);
        assert!("lc".parse::<Estimator>().is_err());
    }
}
