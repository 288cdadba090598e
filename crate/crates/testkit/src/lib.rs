//! Brute-force reference implementations used by the test suites.
//!
//! Everything here works on plain arrays and recomputes from the defining
//! sums, with no windowing, sorting or shared code paths with the library.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Flat clustered data: observation `i` belongs to cluster `cluster[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawData {
    pub cluster: Vec<usize>,
    pub y: Vec<f64>,
    /// Individual coordinates first, then cluster-level ones.
    pub x: Vec<Vec<f64>>,
    pub d_ind: usize,
}

impl RawData {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    pub fn num_clusters(&self) -> usize {
        self.cluster.iter().max().map_or(0, |m| m + 1)
    }

    /// Groups as `(y, x)` lists per cluster.
    pub fn groups(&self) -> Vec<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut out = vec![(Vec::new(), Vec::new()); self.num_clusters()];
        for i in 0..self.n() {
            out[self.cluster[i]].0.push(self.y[i]);
            out[self.cluster[i]].1.push(self.x[i].clone());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kern {
    Epanechnikov,
    Quartic,
}

impl Kern {
    pub fn k(self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Kern::Epanechnikov => 0.75 * (1.0 - u * u),
            Kern::Quartic => 15.0 / 16.0 * (1.0 - u * u) * (1.0 - u * u),
        }
    }

    pub fn product(self, a: &[f64], b: &[f64], h: f64) -> f64 {
        a.iter()
            .zip(b)
            .map(|(p, q)| self.k((p - q) / h))
            .product()
    }
}

/// Random clustered data on `[-1, 1]^d` with cluster-level columns constant
/// within each cluster. Responses are arbitrary smooth functions plus noise.
pub fn random_data(rng: &mut ChaCha8Rng, max_clusters: usize, max_size: usize, d_ind: usize, d_cls: usize) -> RawData {
    let g = rng.random_range(1..=max_clusters);
    let mut data = RawData {
        cluster: Vec::new(),
        y: Vec::new(),
        x: Vec::new(),
        d_ind,
    };
    for c in 0..g {
        let size = rng.random_range(1..=max_size);
        let cls: Vec<f64> = (0..d_cls).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..size {
            let mut row: Vec<f64> = (0..d_ind).map(|_| rng.random_range(-1.0..1.0)).collect();
            row.extend_from_slice(&cls);
            let y = (2.0 * row[0]).sin() + row.iter().sum::<f64>() * 0.3 + rng.random_range(-0.5..0.5);
            data.cluster.push(c);
            data.y.push(y);
            data.x.push(row);
        }
    }
    data
}

/// Gaussian elimination with full pivoting. `None` if a pivot is exactly zero.
pub fn solve_full_pivot(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, 0.0);
        for r in k..n {
            for c in k..n {
                if a[r][c].abs() > best {
                    best = a[r][c].abs();
                    pr = r;
                    pc = c;
                }
            }
        }
        if best == 0.0 {
            return None;
        }
        a.swap(k, pr);
        b.swap(k, pr);
        for row in a.iter_mut() {
            row.swap(k, pc);
        }
        perm.swap(k, pc);
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..n {
                a[r][c] -= f * a[k][c];
            }
            b[r] -= f * b[k];
        }
    }
    let mut z = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * z[c]).sum();
        z[k] = (b[k] - s) / a[k][k];
    }
    let mut out = vec![0.0; n];
    for k in 0..n {
        out[perm[k]] = z[k];
    }
    Some(out)
}

/// Weighted least squares of `y` on the columns of `design` by normal
/// equations, followed by a few rounds of iterative refinement with the
/// residual recomputed from the rows each time.
pub fn wls(design: &[Vec<f64>], w: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let mut beta = wls_once(design, w, y)?;
    for _ in 0..4 {
        let resid: Vec<f64> = design
            .iter()
            .zip(y)
            .map(|(row, &yi)| yi - row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let step = wls_once(design, w, &resid)?;
        for (b, s) in beta.iter_mut().zip(step) {
            *b += s;
        }
    }
    Some(beta)
}

fn wls_once(design: &[Vec<f64>], w: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let p = design.first()?.len();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for ((row, &wi), &yi) in design.iter().zip(w).zip(y) {
        for r in 0..p {
            b[r] += wi * row[r] * yi;
            for c in 0..p {
                a[r][c] += wi * row[r] * row[c];
            }
        }
    }
    solve_full_pivot(a, b)
}

/// Nadaraya-Watson over all observations with `keep(i)`.
pub fn nw(data: &RawData, kern: Kern, h: f64, x: &[f64], keep: impl Fn(usize) -> bool) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..data.n() {
        if keep(i) {
            let w = kern.product(&data.x[i], x, h);
            num += w * data.y[i];
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Local linear intercept over all observations with `keep(i)`, using every
/// such row in the normal equations (zero weights included).
pub fn ll(data: &RawData, kern: Kern, h: f64, x: &[f64], keep: impl Fn(usize) -> bool) -> Option<f64> {
    let rows: Vec<usize> = (0..data.n()).filter(|&i| keep(i)).collect();
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            let mut r = vec![1.0];
            r.extend(data.x[i].iter().zip(x).map(|(a, b)| a - b));
            r
        })
        .collect();
    let w: Vec<f64> = rows.iter().map(|&i| kern.product(&data.x[i], x, h)).collect();
    if w.iter().all(|&v| v == 0.0) {
        return None;
    }
    let y: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
    wls(&design, &w, &y).map(|b| b[0])
}

/// Copy of `data` without the rows for which `drop(i)` holds. Cluster labels
/// are kept as they are.
pub fn without(data: &RawData, drop: impl Fn(usize) -> bool) -> RawData {
    let keep: Vec<usize> = (0..data.n()).filter(|&i| !drop(i)).collect();
    RawData {
        cluster: keep.iter().map(|&i| data.cluster[i]).collect(),
        y: keep.iter().map(|&i| data.y[i]).collect(),
        x: keep.iter().map(|&i| data.x[i].clone()).collect(),
        d_ind: data.d_ind,
    }
}

/// Cross-validation criterion that rebuilds the reduced sample for every
/// prediction. `local_linear` selects the estimator, `by_cluster` the
/// exclusion. `None` if any needed prediction is undefined.
pub fn cv(
    data: &RawData,
    kern: Kern,
    h: f64,
    local_linear: bool,
    lo: &[f64],
    hi: &[f64],
    by_cluster: bool,
) -> Option<f64> {
    let mut total = 0.0;
    for i in 0..data.n() {
        let inside = data.x[i]
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(v, (l, u))| l <= v && v <= u);
        if !inside {
            continue;
        }
        let reduced = if by_cluster {
            let g = data.cluster[i];
            without(data, |j| data.cluster[j] == g)
        } else {
            without(data, |j| j == i)
        };
        let pred = if local_linear {
            ll(&reduced, kern, h, &data.x[i], |_| true)?
        } else {
            nw(&reduced, kern, h, &data.x[i], |_| true)?
        };
        total += (data.y[i] - pred).powi(2);
    }
    Some(total / data.n() as f64)
}

pub fn density(data: &RawData, kern: Kern, h: f64, x: &[f64]) -> f64 {
    let s: f64 = data.x.iter().map(|r| kern.product(r, x, h)).sum();
    s / (data.n() as f64 * h.powi(x.len() as i32))
}

/// All unordered within-cluster pairs by double loop over observations.
pub fn pairs(data: &RawData) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..data.n() {
        for l in j + 1..data.n() {
            if data.cluster[j] == data.cluster[l] {
                out.push((j, l));
            }
        }
    }
    out
}

fn stacked_weight(data: &RawData, kern: Kern, b: f64, j: usize, l: usize, x_ind: &[f64], x_cls: &[f64]) -> f64 {
    let p = data.d_ind;
    let mut stacked: Vec<f64> = data.x[j][..p].to_vec();
    stacked.extend_from_slice(&data.x[l][..p]);
    stacked.extend_from_slice(&data.x[j][p..]);
    let mut at: Vec<f64> = x_ind.to_vec();
    at.extend_from_slice(x_ind);
    at.extend_from_slice(x_cls);
    kern.product(&stacked, &at, b)
}

pub fn joint_density(data: &RawData, kern: Kern, b: f64, x_ind: &[f64], x_cls: &[f64]) -> Option<f64> {
    let ps = pairs(data);
    if ps.is_empty() {
        return None;
    }
    let s: f64 = ps
        .iter()
        .map(|&(j, l)| stacked_weight(data, kern, b, j, l, x_ind, x_cls))
        .sum();
    let dim = 2 * data.d_ind + x_cls.len();
    Some(s / (ps.len() as f64 * b.powi(dim as i32)))
}

pub fn cond_var(data: &RawData, kern: Kern, h: f64, x: &[f64], e: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..data.n() {
        let w = kern.product(&data.x[i], x, h);
        num += w * e[i] * e[i];
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

pub fn cond_cov(data: &RawData, kern: Kern, b: f64, x_ind: &[f64], x_cls: &[f64], e: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (j, l) in pairs(data) {
        let w = stacked_weight(data, kern, b, j, l, x_ind, x_cls);
        num += w * e[j] * e[l];
        den += w;
    }
    (den > 0.0).then(|| num / den)
}

/// Polynomial least squares of degree `deg` in the first coordinate by normal
/// equations.
pub fn poly_ols(xs: &[f64], ys: &[f64], deg: usize) -> Option<Vec<f64>> {
    let design: Vec<Vec<f64>> = xs.iter().map(|&x| (0..=deg).map(|k| x.powi(k as i32)).collect()).collect();
    wls(&design, &vec![1.0; xs.len()], ys)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function by quadrature.
pub fn normal_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 + integrate(&phi, 0.0, x, 1e-15)
    } else {
        0.5 - integrate(&phi, x, 0.0, 1e-15)
    }
}

/// Closed-form density of `N(mean, var)`.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean.
pub fn sem(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
    (var / v.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_pivot_solves() {
        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let x = solve_full_pivot(a.clone(), vec![5.0, 3.0, 6.0]).unwrap();
        for (row, b) in a.iter().zip([5.0, 3.0, 6.0]) {
            let s: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((s - b).abs() < 1e-12);
        }
        assert!(solve_full_pivot(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn quadrature_and_normal() {
        assert!((integrate(&|x| x * x, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-10);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-13);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    }
}
