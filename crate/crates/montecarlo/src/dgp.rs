//! Simulated clustered designs.
//!
//! Regressors and errors share the same random-effects structure:
//! `X_gj = sqrt(ρ_X) A_g + sqrt(1 - ρ_X) B_gj` and
//! `e_gj = sqrt(ρ_e) C_g + sqrt(1 - ρ_e) U_gj` with all latent draws
//! independent standard normal, so `X` and `e` are marginally `N(0, 1)` with
//! within-cluster correlations `ρ_X` and `ρ_e`.

use std::fmt;
use std::str::FromStr;

use clusterkr::{Cluster, ClusteredDataset, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::truth::{true_m, true_sigma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Setup {
    /// `m(x) = sin(2x) + 2 exp(-16 x²)` with error scale `0.5`.
    One,
    /// `m(x) = x sin(2πx)` with error scale `(2 + cos 2πx) / 5`.
    Two,
}

impl Setup {
    /// Default weight window for cross-validation and the ASE grid.
    pub fn window(self) -> (f64, f64) {
        match self {
            Setup::One => (-1.5, 1.5),
            Setup::Two => (0.0, 1.0),
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setup::One => "1",
            Setup::Two => "2",
        })
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Setup> {
        match s {
            "1" => Ok(Setup::One),
            "2" => Ok(Setup::Two),
            _ => Err(Error::InvalidArgument(format!("setup must be 1 or 2, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DgpConfig {
    pub setup: Setup,
    /// Number of clusters `G`.
    pub clusters: usize,
    /// Size of the first `G - 1` clusters.
    pub ng_base: usize,
    /// Size of the last cluster.
    pub ng_last: usize,
    pub rho_x: f64,
    pub rho_e: f64,
    pub seed: u64,
}

/// Independent random streams drawn for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Purpose {
    Sample = 0,
    /// Fresh samples for integrated-error estimates.
    Evaluation = 1,
}

const MAX_REPLICATION: u64 = 1 << 40;

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.ng_base == 0 || self.ng_last == 0 {
            return Err(Error::InvalidArgument(
                "cluster count and cluster sizes must be at least 1".into(),
            ));
        }
        for (name, rho) in [("rho_x", self.rho_x), ("rho_e", self.rho_e)] {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1), got {rho}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        (self.clusters - 1) * self.ng_base + self.ng_last
    }

    fn size(&self, g: usize) -> usize {
        if g + 1 == self.clusters {
            self.ng_last
        } else {
            self.ng_base
        }
    }
}

/// The generator for `(seed, purpose, replication)`: one ChaCha stream per
/// pair, so draws never depend on which thread runs the replication.
pub(crate) fn stream(config: &DgpConfig, purpose: Purpose, replication: u64) -> Result<ChaCha8Rng> {
    if replication >= MAX_REPLICATION {
        return Err(Error::InvalidArgument(format!(
            "replication index {replication} exceeds {MAX_REPLICATION}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(((purpose as u64) << 40) | replication);
    Ok(rng)
}

/// Replication `replication` of the design.
pub fn generate(config: &DgpConfig, replication: u64) -> Result<ClusteredDataset> {
    generate_for(config, Purpose::Sample, replication)
}

pub(crate) fn generate_for(config: &DgpConfig, purpose: Purpose, replication: u64) -> Result<ClusteredDataset> {
    config.validate()?;
    let mut rng = stream(config, purpose, replication)?;
    let (ax, bx) = (config.rho_x.sqrt(), (1.0 - config.rho_x).sqrt());
    let (ae, be) = (config.rho_e.sqrt(), (1.0 - config.rho_e).sqrt());
    let clusters = (0..config.clusters)
        .map(|g| {
            let common_x: f64 = rng.sample(StandardNormal);
            let common_e: f64 = rng.sample(StandardNormal);
            let size = config.size(g);
            let mut x = Vec::with_capacity(size);
            let mut y = Vec::with_capacity(size);
            for _ in 0..size {
                let own_x: f64 = rng.sample(StandardNormal);
                let own_e: f64 = rng.sample(StandardNormal);
                let xv = ax * common_x + bx * own_x;
                let e = ae * common_e + be * own_e;
                x.push(vec![xv]);
                y.push(true_m(config.setup, xv) + true_sigma(config.setup, xv) * e);
            }
            Cluster { id: g.to_string(), y, x }
        })
        .collect();
    ClusteredDataset::from_clusters(clusters, 1, 0)
}
