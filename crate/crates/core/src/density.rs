//! Marginal density and within-cluster pair density.

use crate::dataset::ClusteredDataset;
use crate::error::{check_bandwidth, Error, Result};
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub x: Vec<f64>,
    pub value: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDensityEstimate {
    pub x_ind: Vec<f64>,
    pub x_cls: Vec<f64>,
    pub value: f64,
    pub bandwidth_b: f64,
    /// Number of unordered within-cluster pairs in the whole dataset.
    pub n_pairs: u64,
}

pub(crate) fn check_point(ds: &ClusteredDataset, x: &[f64]) -> Result<()> {
    if x.len() != ds.d() {
        return Err(Error::DimensionMismatch {
            expected: ds.d(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "evaluation point must be finite, got {x:?}"
        )));
    }
    Ok(())
}

/// `(1 / (n h^d)) Σ K((X_i - x) / h)`, pooling all clusters.
pub fn density(ds: &ClusteredDataset, kernel: &KernelSpec, h: f64, x: &[f64]) -> Result<DensityEstimate> {
    check_bandwidth("h", h)?;
    check_point(ds, x)?;
    if ds.is_empty() {
        return Err(Error::NoObservations);
    }
    let mut sum = 0.0;
    for &i in ds.window(x[0], h * kernel.support_radius) {
        sum += kernel.scaled(ds.row(i), x, h);
    }
    let value = sum / (ds.n() as f64 * h.powi(ds.d() as i32));
    Ok(DensityEstimate {
        x: x.to_vec(),
        value,
        bandwidth: h,
    })
}

/// Within-cluster pairs `(j, l)`, `j < l` in dataset order, with their stacked
/// kernel weight `K_ind(j) K_ind(l) K_cls(g)`. Zero-weight pairs are omitted.
/// Pairs come out cluster by cluster in dataset order.
pub(crate) fn weighted_pairs(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    b: f64,
    x_ind: &[f64],
    x_cls: &[f64],
) -> Vec<(usize, usize, f64)> {
    let d_ind = ds.d_ind();
    let mut cand: Vec<(usize, f64)> = ds
        .window(x_ind[0], b * kernel.support_radius)
        .iter()
        .filter_map(|&i| {
            let w = kernel.scaled(&ds.row(i)[..d_ind], x_ind, b);
            (w > 0.0).then_some((i, w))
        })
        .collect();
    cand.sort_unstable_by_key(|&(i, _)| i);

    let mut out = Vec::new();
    let mut start = 0;
    while start < cand.len() {
        let g = ds.cluster_of(cand[start].0);
        let mut end = start + 1;
        while end < cand.len() && ds.cluster_of(cand[end].0) == g {
            end += 1;
        }
        if end - start >= 2 {
            let first = cand[start].0;
            let c = if x_cls.is_empty() {
                1.0
            } else {
                kernel.scaled(&ds.row(first)[d_ind..], x_cls, b)
            };
            if c > 0.0 {
                for p in start..end {
                    for q in p + 1..end {
                        out.push((cand[p].0, cand[q].0, cand[p].1 * cand[q].1 * c));
                    }
                }
            }
        }
        start = end;
    }
    out
}

pub(crate) fn check_pair_point(ds: &ClusteredDataset, x_ind: &[f64], x_cls: &[f64]) -> Result<()> {
    if x_ind.len() != ds.d_ind() {
        return Err(Error::DimensionMismatch {
            expected: ds.d_ind(),
            got: x_ind.len(),
        });
    }
    if x_cls.len() != ds.d_cls() {
        return Err(Error::DimensionMismatch {
            expected: ds.d_cls(),
            got: x_cls.len(),
        });
    }
    if x_ind.iter().chain(x_cls).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("evaluation point must be finite".into()));
    }
    if ds.size_summary().n_pairs() == 0 {
        return Err(Error::NoPairs);
    }
    Ok(())
}

/// Joint density of two members of the same cluster at `(x_ind, x_ind; x_cls)`,
/// using one product kernel over the stacked `2 d_ind + d_cls` coordinates.
pub fn joint_density_pairs(
    ds: &ClusteredDataset,
    kernel: &KernelSpec,
    b: f64,
    x_ind: &[f64],
    x_cls: &[f64],
) -> Result<JointDensityEstimate> {
    check_bandwidth("b", b)?;
    check_pair_point(ds, x_ind, x_cls)?;
    let n_pairs = ds.size_summary().n_pairs();
    let sum: f64 = weighted_pairs(ds, kernel, b, x_ind, x_cls)
        .iter()
        .map(|p| p.2)
        .sum();
    let dim = (2 * ds.d_ind() + ds.d_cls()) as i32;
    Ok(JointDensityEstimate {
        x_ind: x_ind.to_vec(),
        x_cls: x_cls.to_vec(),
        value: sum / (n_pairs as f64 * b.powi(dim)),
        bandwidth_b: b,
        n_pairs,
    })
}
