#![allow(dead_code)]

use clusterkr::{Cluster, ClusteredDataset, KernelSpec};
use clusterkr_testkit::{Kern, RawData};

pub fn to_dataset(raw: &RawData) -> ClusteredDataset {
    let clusters = raw
        .groups()
        .into_iter()
        .enumerate()
        .map(|(g, (y, x))| Cluster {
            id: format!("c{g}"),
            y,
            x,
        })
        .collect();
    ClusteredDataset::from_clusters(clusters, raw.d_ind, raw.d() - raw.d_ind).unwrap()
}

pub fn kernel_of(k: Kern) -> KernelSpec {
    match k {
        Kern::Epanechnikov => KernelSpec::EPANECHNIKOV,
        Kern::Quartic => KernelSpec::QUARTIC,
    }
}

/// Relative-or-absolute closeness.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
