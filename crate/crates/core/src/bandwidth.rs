//! Bandwidth selection.
//!
//! Rule-of-thumb bandwidths plug a global quartic pilot fit into the AIMSE
//! formula; the cluster-robust version refits the pilot without each cluster.
//! Cross-validation scores prediction errors of fits that leave out either the
//! whole cluster or only the observation itself.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::ClusteredDataset;
use crate::error::{check_bandwidth, Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::least_squares;
use crate::regress::{fit_excluding, Estimator, Exclusion, ResidualSet, ResidualVariant};

/// Box weight `w(x) = 1{lo <= x <= hi}` coordinate-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightWindow {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl WeightWindow {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<WeightWindow> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument(
                "weight window bounds must be non-empty and of equal length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight window needs finite lo < hi in every coordinate, got {lo:?} and {hi:?}"
            )));
        }
        Ok(WeightWindow { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<WeightWindow> {
        WeightWindow::new(vec![lo], vec![hi])
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// `∫ w`.
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    fn check(&self, ds: &ClusteredDataset) -> Result<()> {
        if self.dim() != ds.d() {
            return Err(Error::DimensionMismatch {
                expected: ds.d(),
                got: self.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandwidthMethod {
    Rot,
    CrRot,
    Cv,
    CrCv,
    Aimse,
    Reference,
}

impl BandwidthMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BandwidthMethod::Rot => "rot",
            BandwidthMethod::CrRot => "cr-rot",
            BandwidthMethod::Cv => "cv",
            BandwidthMethod::CrCv => "cr-cv",
            BandwidthMethod::Aimse => "aimse",
            BandwidthMethod::Reference => "reference",
        }
    }
}

impl fmt::Display for BandwidthMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandwidthMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            BandwidthMethod::Rot,
            BandwidthMethod::CrRot,
            BandwidthMethod::Cv,
            BandwidthMethod::CrCv,
            BandwidthMethod::Aimse,
            BandwidthMethod::Reference,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown bandwidth method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthReport {
    pub method: BandwidthMethod,
    pub h: f64,
    /// Grid methods: every candidate in grid order with its criterion, or
    /// `None` where the criterion could not be evaluated.
    pub trace: Vec<(f64, Option<f64>)>,
    /// Rule-of-thumb methods: `(B, sigma2)` plugged into the AIMSE formula.
    pub components: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Cluster sizes times `h^d_ind` above this value make the AIMSE expansion
/// unreliable.
const GUARD_LIMIT: f64 = 10.0;

fn guard_warnings(ds: &ClusteredDataset, h: f64) -> Vec<String> {
    let s = ds.size_summary();
    let v = s.max_ng as f64 * h.powi(ds.d_ind() as i32);
    if v >= GUARD_LIMIT {
        vec![format!(
            "max cluster size times h^d_ind is {v:.3}; the AIMSE approximation may be poor, cross-validation is recommended"
        )]
    } else {
        Vec::new()
    }
}

/// `(d R_k^d σ² / (4 B))^{1/(d+4)} n^{-1/(d+4)}`.
pub fn aimse_h0(b_bar: f64, sigma2_bar: f64, r_k: f64, d: usize, n: usize) -> Result<f64> {
    for (name, v) in [("B", b_bar), ("sigma2", sigma2_bar), ("r_k", r_k)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument("d and n must be at least 1".into()));
    }
    let p = 1.0 / (d as f64 + 4.0);
    let c = d as f64 * r_k.powi(d as i32) * sigma2_bar / (4.0 * b_bar);
    Ok(c.powf(p) * (n as f64).powf(-p))
}

/// Coefficients `α_0..α_4` of a global quartic in the single regressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyFit4 {
    pub coef: [f64; 5],
}

impl PolyFit4 {
    pub fn eval(&self, x: f64) -> f64 {
        self.coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `m''(x) / 2 = α_2 + 3 α_3 x + 6 α_4 x²`.
    pub fn half_second_derivative(&self, x: f64) -> f64 {
        let a = &self.coef;
        a[2] + 3.0 * a[3] * x + 6.0 * a[4] * x * x
    }
}

fn require_scalar(ds: &ClusteredDataset, what: &str) -> Result<()> {
    if ds.d() != 1 {
        return Err(Error::InvalidArgument(format!(
            "{what} needs exactly one regressor, the dataset has {}",
            ds.d()
        )));
    }
    Ok(())
}

fn poly4_excluding(ds: &ClusteredDataset, skip: Option<usize>) -> Result<PolyFit4> {
    require_scalar(ds, "the global quartic fit")?;
    let rows: Vec<usize> = (0..ds.n())
        .filter(|&i| Some(ds.cluster_of(i)) != skip)
        .collect();
    let mut distinct: Vec<f64> = rows.iter().map(|&i| ds.row(i)[0]).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::Singular(format!(
            "quartic fit needs at least 5 distinct regressor values, got {}",
            distinct.len()
        )));
    }
    let design = DMatrix::from_fn(rows.len(), 5, |r, c| ds.row(rows[r])[0].powi(c as i32));
    let y: Vec<f64> = rows.iter().map(|&i| ds.y()[i]).collect();
    let beta = least_squares(design, &y)?;
    Ok(PolyFit4 {
        coef: [beta[0], beta[1], beta[2], beta[3], beta[4]],
    })
}

pub fn global_poly4(ds: &ClusteredDataset) -> Result<PolyFit4> {
    poly4_excluding(ds, None)
}

/// Global quartic least-squares fit with cluster `g` left out.
pub fn global_poly4_loco(ds: &ClusteredDataset, g: usize) -> Result<PolyFit4> {
    if g >= ds.num_clusters() {
        return Err(Error::ClusterIndex {
            index: g,
            len: ds.num_clusters(),
        });
    }
    poly4_excluding(ds, Some(g))
}

/// One pilot fit per cluster: the leave-that-cluster-out fit, or the same
/// full-sample fit for every cluster.
pub(crate) fn pilot_fits(ds: &ClusteredDataset, cluster_robust: bool) -> Result<Vec<PolyFit4>> {
    if cluster_robust {
        (0..ds.num_clusters())
            .into_par_iter()
            .map(|g| global_poly4_loco(ds, g).map_err(|e| e.context(format!("pilot fit without cluster {g}"))))
            .collect()
    } else {
        let full = global_poly4(ds)?;
        Ok(vec![full; ds.num_clusters()])
    }
}

/// Residuals `Y - m̌(X)` of the pilot fits.
pub fn poly4_residuals(ds: &ClusteredDataset, cluster_robust: bool) -> Result<ResidualSet> {
    let fits = pilot_fits(ds, cluster_robust)?;
    Ok(residuals_from_pilots(ds, &fits))
}

pub(crate) fn residuals_from_pilots(ds: &ClusteredDataset, fits: &[PolyFit4]) -> ResidualSet {
    let values = (0..ds.n())
        .map(|i| ds.y()[i] - fits[ds.cluster_of(i)].eval(ds.row(i)[0]))
        .collect();
    ResidualSet::new(ResidualVariant::GlobalPoly4, values)
}

/// Rule-of-thumb bandwidth from global quartic pilot fits.
pub fn rot(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    window: &WeightWindow,
    cluster_robust: bool,
) -> Result<BandwidthReport> {
    require_scalar(ds, "the rule-of-thumb bandwidth")?;
    window.check(ds)?;
    let fits = pilot_fits(ds, cluster_robust)?;
    let n = ds.n() as f64;
    let mut b_sum = 0.0;
    let mut e_sum = 0.0;
    for i in 0..ds.n() {
        let fit = &fits[ds.cluster_of(i)];
        let x = ds.row(i)[0];
        let e = ds.y()[i] - fit.eval(x);
        e_sum += e * e;
        if window.contains(ds.row(i)) {
            let b = fit.half_second_derivative(x);
            b_sum += b * b;
        }
    }
    let b_check = b_sum / n;
    let s2_check = e_sum / n * window.volume();
    if !(b_check > 0.0) {
        return Err(Error::Validation(
            "rule-of-thumb curvature is zero: the weight window contains no observations or the pilot fit is linear".into(),
        ));
    }
    let h = aimse_h0(b_check, s2_check, kernel.r_k, 1, ds.n())?;
    Ok(BandwidthReport {
        method: if cluster_robust {
            BandwidthMethod::CrRot
        } else {
            BandwidthMethod::Rot
        },
        h,
        trace: Vec::new(),
        components: Some((b_check, s2_check)),
        warnings: guard_warnings(ds, h),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CvMode {
    LeaveOneClusterOut,
    LeaveOneOut,
}

/// `(1/n) Σ (Y_i - m̃(X_i))² w(X_i)` where `m̃` leaves out the observation's
/// cluster or only the observation. Only observations with `w > 0` are
/// predicted.
pub fn cv_criterion(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    h: f64,
    estimator: Estimator,
    window: &WeightWindow,
    mode: CvMode,
) -> Result<f64> {
    check_bandwidth("h", h)?;
    window.check(ds)?;
    if ds.is_empty() {
        return Err(Error::NoObservations);
    }
    let terms = (0..ds.n())
        .into_par_iter()
        .map(|i| {
            let x = ds.row(i);
            if !window.contains(x) {
                return Ok(0.0);
            }
            let exclusion = match mode {
                CvMode::LeaveOneClusterOut => Exclusion::Cluster(ds.cluster_of(i)),
                CvMode::LeaveOneOut => Exclusion::Observation(i),
            };
            let f = fit_excluding(ds, kernel, estimator, h, x, exclusion).map_err(|e| {
                Error::Prediction {
                    observation: i,
                    h,
                    source: Box::new(e),
                }
            })?;
            let r = ds.y()[i] - f.estimate;
            Ok(r * r)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum::<f64>() / ds.n() as f64)
}

/// `n` log-spaced points from `center * span.0` to `center * span.1`,
/// endpoints included.
pub fn default_grid(center: f64, n: usize, span: (f64, f64)) -> Result<Vec<f64>> {
    check_bandwidth("grid center", center)?;
    if n == 0 || !(span.0 > 0.0 && span.0 <= span.1 && span.1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid needs n >= 1 and 0 < span.0 <= span.1, got n = {n}, span = {span:?}"
        )));
    }
    let (a, b) = ((center * span.0).ln(), (center * span.1).ln());
    if n == 1 {
        return Ok(vec![center * span.0]);
    }
    Ok((0..n)
        .map(|k| {
            if k == 0 {
                center * span.0
            } else if k == n - 1 {
                center * span.1
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// Minimizes the cross-validation criterion over `grid`; ties go to the
/// smallest bandwidth.
pub fn cv_select(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    estimator: Estimator,
    window: &WeightWindow,
    mode: CvMode,
    grid: &[f64],
) -> Result<BandwidthReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("bandwidth grid is empty".into()));
    }
    for &h in grid {
        check_bandwidth("grid bandwidth", h)?;
    }
    let results: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&h| cv_criterion(ds, kernel, h, estimator, window, mode))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    let mut failures = Vec::new();
    let mut trace = Vec::with_capacity(grid.len());
    for (&h, r) in grid.iter().zip(results) {
        match r {
            Ok(v) => {
                trace.push((h, Some(v)));
                let better = match best {
                    None => true,
                    Some((bh, bv)) => v < bv || (v == bv && h < bh),
                };
                if better {
                    best = Some((h, v));
                }
            }
            Err(e) => {
                trace.push((h, None));
                failures.push((h, e.to_string()));
            }
        }
    }
    let (h, _) = best.ok_or(Error::AllCandidatesFailed { failures })?;
    Ok(BandwidthReport {
        method: match mode {
            CvMode::LeaveOneClusterOut => BandwidthMethod::CrCv,
            CvMode::LeaveOneOut => BandwidthMethod::Cv,
        },
        h,
        trace,
        components: None,
        warnings: guard_warnings(ds, h),
    })
}

/// `h · n^{1/5 - 2/7}`.
pub fn undersmooth(h: f64, n: usize) -> Result<f64> {
    check_bandwidth("h", h)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(h * (n as f64).powf(-3.0 / 35.0))
}

/// `1.049 · S_X · n^{-1/5}` with the sample standard deviation `S_X`.
pub fn reference_h(ds: &ClusteredDataset) -> Result<f64> {
    require_scalar(ds, "the reference bandwidth")?;
    let n = ds.n();
    if n < 2 {
        return Err(Error::Validation(
            "reference bandwidth needs at least two observations".into(),
        ));
    }
    let xs: Vec<f64> = ds.rows().map(|r| r[0]).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::Validation(
            "reference bandwidth undefined: the regressor has zero variance".into(),
        ));
    }
    Ok(1.049 * var.sqrt() * (n as f64).powf(-0.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Cluster;

    fn scalar_ds(groups: Vec<Vec<(f64, f64)>>) -> ClusteredDataset {
        let clusters = groups
            .into_iter()
            .enumerate()
            .map(|(g, obs)| Cluster {
                id: g.to_string(),
                y: obs.iter().map(|o| o.1).collect(),
                x: obs.iter().map(|o| vec![o.0]).collect(),
            })
            .collect();
        ClusteredDataset::from_clusters(clusters, 1, 0).unwrap()
    }

    #[test]
    fn aimse_values() {
        let h = aimse_h0(1.0, 1.0, 0.6, 1, 100).unwrap();
        assert!((h - 0.15f64.powf(0.2) * 100f64.powf(-0.2)).abs() < 1e-15);
        assert!((h - 0.272_407_0).abs() < 1e-7);
        let b16 = aimse_h0(16.0, 1.0, 0.6, 1, 100).unwrap();
        assert!((b16 / h - 16f64.powf(-0.2)).abs() < 1e-14);
        let n16 = aimse_h0(1.0, 1.0, 0.6, 1, 1600).unwrap();
        assert!((n16 / h - 16f64.powf(-0.2)).abs() < 1e-14);
        assert!(aimse_h0(0.0, 1.0, 0.6, 1, 100).is_err());
        assert!(aimse_h0(1.0, -1.0, 0.6, 1, 100).is_err());
    }

    #[test]
    fn undersmoothing() {
        let h = undersmooth(0.1301, 3784).unwrap();
        assert!((h - 0.0642).abs() < 5e-5);
        assert_eq!(undersmooth(0.3, 1).unwrap(), 0.3);
        let r = undersmooth(0.3, 2000).unwrap() / undersmooth(0.3, 1000).unwrap();
        assert!((r - 2f64.powf(-3.0 / 35.0)).abs() < 1e-14);
    }

    #[test]
    fn reference_bandwidth() {
        // Sample standard deviation exactly one.
        let ds = scalar_ds(vec![vec![(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]]);
        let expected = 1.049 * 3f64.powf(-0.2);
        assert!((reference_h(&ds).unwrap() - expected).abs() < 1e-15);
        let flat = scalar_ds(vec![vec![(2.0, 0.0), (2.0, 1.0)]]);
        assert!(reference_h(&flat).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = default_grid(0.3, 50, (1.0 / 3.0, 3.0)).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.3 * (1.0 / 3.0));
        assert_eq!(g[49], 0.3 * 3.0);
        for w in g.windows(3) {
            assert!(((w[2] / w[1]) - (w[1] / w[0])).abs() < 1e-12);
        }
        assert_eq!(default_grid(0.3, 1, (1.0, 1.0)).unwrap(), vec![0.3]);
    }

    #[test]
    fn quartic_recovered() {
        let coef = [0.5, -1.0, 0.25, 2.0, -0.75];
        let groups = (0..4)
            .map(|g| {
                (0..6)
                    .map(|j| {
                        let x = -1.0 + (g * 6 + j) as f64 / 12.0;
                        (x, PolyFit4 { coef }.eval(x))
                    })
                    .collect()
            })
            .collect();
        let ds = scalar_ds(groups);
        for g in 0..4 {
            let fit = global_poly4_loco(&ds, g).unwrap();
            for (a, b) in fit.coef.iter().zip(coef) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        assert!(global_poly4_loco(&ds, 4).is_err());
    }

    #[test]
    fn quartic_needs_five_points() {
        let ds = scalar_ds(vec![
            vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.0), (3.0, 1.0)],
            vec![(4.0, 1.0)],
        ]);
        assert!(global_poly4(&ds).is_ok());
        assert!(matches!(global_poly4_loco(&ds, 1), Err(Error::Singular(_))));
    }

    #[test]
    fn cv_trivial_cases() {
        let groups = (0..3)
            .map(|g| (0..4).map(|j| ((g * 4 + j) as f64 / 11.0, 2.0)).collect())
            .collect();
        let ds = scalar_ds(groups);
        let k = KernelSpec::EPANECHNIKOV;
        let w = WeightWindow::interval(0.0, 1.0).unwrap();
        let cv = cv_criterion(&ds, &k, 0.5, Estimator::Nw, &w, CvMode::LeaveOneClusterOut).unwrap();
        assert_eq!(cv, 0.0);
        let away = WeightWindow::interval(5.0, 6.0).unwrap();
        let cv = cv_criterion(&ds, &k, 0.01, Estimator::Ll, &away, CvMode::LeaveOneOut).unwrap();
        assert_eq!(cv, 0.0);

        let one = cv_select(&ds, &k, Estimator::Nw, &w, CvMode::LeaveOneOut, &[0.4]).unwrap();
        assert_eq!(one.h, 0.4);
        assert_eq!(one.method, BandwidthMethod::Cv);
    }

    #[test]
    fn cv_select_ties_and_failures() {
        let groups = (0..3)
            .map(|g| (0..4).map(|j| ((g * 4 + j) as f64 / 11.0, 1.0)).collect())
            .collect();
        let ds = scalar_ds(groups);
        let k = KernelSpec::EPANECHNIKOV;
        let w = WeightWindow::interval(0.0, 1.0).unwrap();
        // Constant response: every candidate scores zero, the smallest wins.
        let r = cv_select(&ds, &k, Estimator::Nw, &w, CvMode::LeaveOneClusterOut, &[0.9, 0.5, 0.7])
            .unwrap();
        assert_eq!(r.h, 0.5);
        assert_eq!(r.trace.iter().map(|t| t.0).collect::<Vec<_>>(), vec![0.9, 0.5, 0.7]);

        // Tiny bandwidths leave every cluster-out prediction empty.
        let err = cv_select(&ds, &k, Estimator::Nw, &w, CvMode::LeaveOneClusterOut, &[1e-4, 2e-4])
            .unwrap_err();
        match err {
            Error::AllCandidatesFailed { failures } => assert_eq!(failures.len(), 2),
            other => panic!("{other}"),
        }
        let mixed = cv_select(&ds, &k, Estimator::Nw, &w, CvMode::LeaveOneClusterOut, &[1e-4, 0.6])
            .unwrap();
        assert_eq!(mixed.h, 0.6);
        assert_eq!(mixed.trace[0].1, None);
    }

    #[test]
    fn window_volume() {
        assert_eq!(WeightWindow::interval(-1.5, 1.5).unwrap().volume(), 3.0);
        assert!(WeightWindow::interval(1.0, 1.0).is_err());
    }
}
