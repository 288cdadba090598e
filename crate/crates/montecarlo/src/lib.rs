//! Simulation harness for clustered kernel regression.
//!
//! Every replication draws from its own ChaCha stream keyed by the seed and
//! the replication index, so tables are identical for any thread count.
//! Replications run in parallel and are reduced in index order.
//!
//! ```
//! use clusterkr_sim::{generate, DgpConfig, Setup};
//!
//! let cfg = DgpConfig { setup: Setup::One, clusters: 10, ng_base: 5, ng_last: 8, rho_x: 0.5, rho_e: 0.5, seed: 7 };
//! let ds = generate(&cfg, 0).unwrap();
//! assert_eq!(ds.n(), 53);
//! assert_eq!(ds, generate(&cfg, 0).unwrap());
//! ```

mod ase;
mod coverage;
mod decomposition;
mod dgp;
mod replicate;
mod truth;

pub use ase::{ase, run_ase_table, AseConfig, AseRecord};
pub use coverage::{run_coverage_table, BiasMode, CiVariant, CoverageConfig, CoverageRecord};
pub use decomposition::{run_cv_decomposition, DecompositionConfig, DecompositionReport};
pub use dgp::{generate, DgpConfig, Setup};
pub use replicate::{mean_se, FailurePolicy};
pub use truth::{
    density_score, marginal_density, sigma2_w, simpson, true_bias, true_d2m, true_dm, true_m,
    true_sigma,
};
