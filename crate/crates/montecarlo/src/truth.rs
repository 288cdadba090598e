//! Closed forms for the simulated designs.

use std::f64::consts::PI;

use clusterkr::{Estimator, KernelSpec};

use crate::dgp::Setup;

pub fn true_m(setup: Setup, x: f64) -> f64 {
    match setup {
        Setup::One => (2.0 * x).sin() + 2.0 * (-16.0 * x * x).exp(),
        Setup::Two => x * (2.0 * PI * x).sin(),
    }
}

/// `m'(x)`.
pub fn true_dm(setup: Setup, x: f64) -> f64 {
    match setup {
        Setup::One => 2.0 * (2.0 * x).cos() - 64.0 * x * (-16.0 * x * x).exp(),
        Setup::Two => (2.0 * PI * x).sin() + 2.0 * PI * x * (2.0 * PI * x).cos(),
    }
}

/// `m''(x)`.
pub fn true_d2m(setup: Setup, x: f64) -> f64 {
    match setup {
        Setup::One => -4.0 * (2.0 * x).sin() + (2048.0 * x * x - 64.0) * (-16.0 * x * x).exp(),
        Setup::Two => {
            let t = 2.0 * PI * x;
            4.0 * PI * t.cos() - 4.0 * PI * PI * x * t.sin()
        }
    }
}

/// Conditional standard deviation of the error.
pub fn true_sigma(setup: Setup, x: f64) -> f64 {
    match setup {
        Setup::One => 0.5,
        Setup::Two => (2.0 + (2.0 * PI * x).cos()) / 5.0,
    }
}

/// Standard normal density, the marginal density of every `X_gj`.
pub fn marginal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `f'(x) / f(x) = -x` for the standard normal marginal.
pub fn density_score(x: f64) -> f64 {
    -x
}

/// Leading bias coefficient `B(x)`; the bias of the estimate is about
/// `h² B(x)`. Local linear: `κ₂ m''/2`; Nadaraya-Watson adds
/// `κ₂ m' f'/f`.
pub fn true_bias(setup: Setup, estimator: Estimator, x: f64, kernel: &KernelSpec) -> f64 {
    let half_curv = 0.5 * true_d2m(setup, x);
    match estimator {
        Estimator::Ll => kernel.kappa2 * half_curv,
        Estimator::Nw => kernel.kappa2 * (half_curv + density_score(x) * true_dm(setup, x)),
    }
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = (intervals.max(2) + 1) & !1;
    let step = (b - a) / m as f64;
    let mut sum = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + step * i as f64);
    }
    sum * step / 3.0
}

/// `E[σ²(X) w(X)]` for the indicator weight on `[lo, hi]`.
pub fn sigma2_w(setup: Setup, lo: f64, hi: f64) -> f64 {
    simpson(|x| true_sigma(setup, x).powi(2) * marginal_density(x), lo, hi, 4000)
}
