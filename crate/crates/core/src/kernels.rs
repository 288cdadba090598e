//! Univariate kernels and their product-form extension to `d` dimensions.
//!
//! Every shipped kernel is symmetric, nonnegative, integrates to one and has
//! compact support, so windowed sums over sorted data are exact. The analytic
//! constants (second moment `kappa2`, roughness `r_k`) are stored in closed
//! form.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Normalizing constant of the standard normal restricted to `[-6, 6]`,
/// `erf(6 / sqrt(2))`.
const GAUSS_TRUNC_MASS: f64 = 0.999_999_998_026_824_7;
const GAUSS_TRUNC_RADIUS: f64 = 6.0;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelName {
    Epanechnikov,
    Quartic,
    GaussianTruncated,
}

impl KernelName {
    pub const ALL: [KernelName; 3] = [
        KernelName::Epanechnikov,
        KernelName::Quartic,
        KernelName::GaussianTruncated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelName::Epanechnikov => "epanechnikov",
            KernelName::Quartic => "quartic",
            KernelName::GaussianTruncated => "gaussian-truncated",
        }
    }
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelName::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown kernel '{s}' (expected epanechnikov, quartic or gaussian-truncated)"
                ))
            })
    }
}

/// A univariate kernel together with the constants the bandwidth and
/// variance formulas need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub name: KernelName,
    /// `∫ u² k(u) du`
    pub kappa2: f64,
    /// `∫ k(u)² du`
    pub r_k: f64,
    /// `k(u) = 0` for `|u| > support_radius`.
    pub support_radius: f64,
    /// `sup_u k(u)`
    pub upper_bound: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::EPANECHNIKOV
    }
}

impl KernelSpec {
    /// `k(u) = 3/4 (1 - u²)` on `[-1, 1]`.
    pub const EPANECHNIKOV: KernelSpec = KernelSpec {
        name: KernelName::Epanechnikov,
        kappa2: 0.2,
        r_k: 0.6,
        support_radius: 1.0,
        upper_bound: 0.75,
    };

    /// `k(u) = 15/16 (1 - u²)²` on `[-1, 1]`.
    pub const QUARTIC: KernelSpec = KernelSpec {
        name: KernelName::Quartic,
        kappa2: 1.0 / 7.0,
        r_k: 5.0 / 7.0,
        support_radius: 1.0,
        upper_bound: 15.0 / 16.0,
    };

    /// Standard normal density truncated to `[-6, 6]` and renormalized.
    ///
    /// `kappa2 = 1 - 12 φ(6) / Z` and `r_k = erf(6) / (2 sqrt(π) Z²)` with
    /// `Z = erf(6 / sqrt(2))`.
    pub const GAUSSIAN_TRUNCATED: KernelSpec = KernelSpec {
        name: KernelName::GaussianTruncated,
        kappa2: 0.999_999_927_089_405_7,
        r_k: 0.282_094_792_887_123_1,
        support_radius: GAUSS_TRUNC_RADIUS,
        upper_bound: FRAC_1_SQRT_2PI / GAUSS_TRUNC_MASS,
    };

    pub fn new(name: KernelName) -> KernelSpec {
        match name {
            KernelName::Epanechnikov => KernelSpec::EPANECHNIKOV,
            KernelName::Quartic => KernelSpec::QUARTIC,
            KernelName::GaussianTruncated => KernelSpec::GAUSSIAN_TRUNCATED,
        }
    }

    /// `k(u)`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let a = u.abs();
        if !(a <= self.support_radius) {
            return 0.0;
        }
        match self.name {
            KernelName::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelName::Quartic => {
                let t = 1.0 - u * u;
                0.9375 * t * t
            }
            KernelName::GaussianTruncated => {
                FRAC_1_SQRT_2PI * (-0.5 * u * u).exp() / GAUSS_TRUNC_MASS
            }
        }
    }

    /// Product kernel `∏_q k(u_q)`.
    pub fn eval_product(&self, u: &[f64]) -> Result<f64> {
        if u.is_empty() {
            return Err(Error::InvalidArgument(
                "product kernel needs at least one coordinate".into(),
            ));
        }
        Ok(self.product_iter(u.iter().copied()))
    }

    #[inline]
    pub(crate) fn product_iter(&self, u: impl IntoIterator<Item = f64>) -> f64 {
        let mut acc = 1.0;
        for v in u {
            let k = self.eval(v);
            if k == 0.0 {
                return 0.0;
            }
            acc *= k;
        }
        acc
    }

    /// `K((xi - x) / h)` for a row `xi` and evaluation point `x` of equal
    /// length.
    #[inline]
    pub(crate) fn scaled(&self, xi: &[f64], x: &[f64], h: f64) -> f64 {
        self.product_iter(xi.iter().zip(x).map(|(a, b)| (a - b) / h))
    }

    /// `(kappa2, r_k)`.
    pub fn constants(&self) -> (f64, f64) {
        (self.kappa2, self.r_k)
    }

    /// `r_k^d`.
    pub fn r_k_pow(&self, d: usize) -> f64 {
        self.r_k.powi(d as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epanechnikov_values() {
        let k = KernelSpec::EPANECHNIKOV;
        assert_eq!(k.eval(0.0), 0.75);
        assert_eq!(k.eval(1.5), 0.0);
        assert_eq!(k.eval(-1.5), 0.0);
        assert_eq!(k.eval(0.25), 0.703125);
        assert_eq!(k.eval(1.0), 0.0);
    }

    #[test]
    fn product_values() {
        let k = KernelSpec::EPANECHNIKOV;
        assert_eq!(k.eval_product(&[0.0, 0.0]).unwrap(), 0.5625);
        assert_eq!(k.eval_product(&[0.25, 0.0]).unwrap(), 0.52734375);
        for kern in KernelName::ALL.map(KernelSpec::new) {
            let outside = kern.support_radius * 1.01;
            assert_eq!(kern.eval_product(&[0.1, outside, 0.2]).unwrap(), 0.0);
        }
    }

    #[test]
    fn product_rejects_empty() {
        assert!(KernelSpec::QUARTIC.eval_product(&[]).is_err());
    }

    #[test]
    fn constants_closed_form() {
        assert_eq!(KernelSpec::EPANECHNIKOV.constants(), (0.2, 0.6));
        let (k2, rk) = KernelSpec::QUARTIC.constants();
        assert_eq!(k2, 1.0 / 7.0);
        assert_eq!(rk, 5.0 / 7.0);
    }

    #[test]
    fn bounded_by_upper_bound() {
        for kern in KernelName::ALL.map(KernelSpec::new) {
            for i in -800..=800 {
                let u = i as f64 / 100.0;
                let v = kern.eval(u);
                assert!(v >= 0.0 && v <= kern.upper_bound, "{} at {u}", kern.name);
            }
            assert_eq!(kern.eval(0.0), kern.upper_bound);
        }
    }

    #[test]
    fn nan_argument_gives_zero() {
        assert_eq!(KernelSpec::EPANECHNIKOV.eval(f64::NAN), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for name in KernelName::ALL {
            assert_eq!(name.as_str().parse::<KernelName>().unwrap(), name);
        }
        assert!("gaussian".parse::<KernelName>().is_err());
    }
}
