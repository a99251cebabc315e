//! Gauss–Legendre rules and graded product-integration meshes for
//! `∫₀ᵗ s^{−a} (t−s)^{−b} g(s) ds`.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Quadrature nodes and weights on `[0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * g(s)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Coefficients of the shifted Legendre polynomial `P_j(2v − 1)` in powers of `v`.
fn shifted_legendre(j: usize) -> Vec<f64> {
    let binom = |n: usize, k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    (0..=j)
        .map(|k| {
            let sign = if (j + k).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * binom(j, k) * binom(j + k, k)
        })
        .collect()
}

/// `∫₀¹ v^{k−a} (1 − ρv)^{−b} dv` for `ρ ≤ 1/2`, by the binomial series.
fn end_moment(k: usize, a: f64, b: f64, rho: f64) -> f64 {
    let mut coef = 1.0;
    let mut rp = 1.0;
    let mut sum = 0.0;
    for m in 0..400 {
        let term = coef * rp / (k as f64 + m as f64 + 1.0 - a);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        coef *= (b + m as f64) / (m as f64 + 1.0);
        rp *= rho;
    }
    sum
}

/// Moments `∫_{panel} w(s) P_j(x(s)) ds`, `j < order`, of the weight
/// `w(s) = s^{−a}(t−s)^{−b}` over `[lo, hi] ⊂ [0, t]`.
fn panel_moments(lo: f64, hi: f64, t: f64, a: f64, b: f64, order: usize) -> Vec<f64> {
    let len = hi - lo;
    if lo == 0.0 && hi < t {
        // s = len·v: ∫₀¹ len^{1−a} v^{−a} t^{−b} (1 − ρv)^{−b} P_j(2v−1) dv
        let rho = len / t;
        let scale = len.powf(1.0 - a) * t.powf(-b);
        return (0..order)
            .map(|j| {
                let c = shifted_legendre(j);
                scale * c.iter().enumerate().map(|(k, ck)| ck * end_moment(k, a, b, rho)).sum::<f64>()
            })
            .collect();
    }
    if hi == t && lo > 0.0 {
        // s = t − len·v; P_j(x) at v is (−1)^j P_j(2v − 1)
        let rho = len / t;
        let scale = len.powf(1.0 - b) * t.powf(-a);
        return (0..order)
            .map(|j| {
                let c = shifted_legendre(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * scale * c.iter().enumerate().map(|(k, ck)| ck * end_moment(k, b, a, rho)).sum::<f64>()
            })
            .collect();
    }
    // interior panel: the weight is analytic here; a high-order rule is exact to round-off
    let (gx, gw) = gauss_legendre(64);
    let mut mom = vec![0.0; order];
    for (x, wq) in gx.iter().zip(&gw) {
        let s = lo + 0.5 * (x + 1.0) * len;
        let wt = s.powf(-a) * (t - s).powf(-b) * 0.5 * len * wq;
        let (mut p0, mut p1) = (1.0, *x);
        for (j, m) in mom.iter_mut().enumerate() {
            let pj = match j {
                0 => 1.0,
                1 => *x,
                _ => {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                    p2
                }
            };
            *m += wt * pj;
        }
    }
    mom
}

/// Solves `Σᵢ Wᵢ P_j(xᵢ) = μ_j` for the interpolatory weights of one panel.
#[allow(clippy::needless_range_loop)]
fn solve_weights(x: &[f64], mom: &[f64]) -> Vec<f64> {
    let n = x.len();
    // row j: P_j at the nodes
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, &xi) in x.iter().enumerate() {
        let (mut p0, mut p1) = (1.0, xi);
        for (j, row) in a.iter_mut().enumerate() {
            row[i] = match j {
                0 => 1.0,
                1 => xi,
                _ => {
                    let p2 = ((2 * j - 1) as f64 * xi * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                    p2
                }
            };
        }
    }
    for (j, row) in a.iter_mut().enumerate() {
        row[n] = mom[j];
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .expect("non-empty");
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut w = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * w[c]).sum();
        w[r] = (a[r][n] - s) / a[r][r];
    }
    w
}

/// Product-integration rule on `[0, t]` exact for `s^{−a}(t−s)^{−b}·poly`
/// of degree below the per-panel order.
///
/// Panels are graded toward both endpoints with exponents `1/(1−a)` and
/// `1/(1−b)`; each panel carries Gauss–Legendre nodes and weights from local
/// Beta-moment matching.
pub fn graded_mesh(t: f64, nodes: usize, a: f64, b: f64) -> Result<Quadrature> {
    if nodes < 4 {
        return Err(Error::arg(format!("graded_mesh needs at least 4 nodes, got {nodes}")));
    }
    if !(a < 1.0 && b < 1.0) {
        return Err(Error::arg(format!("endpoint strengths must be < 1 (got a = {a}, b = {b})")));
    }
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::arg("endpoint strengths must be >= 0"));
    }
    if !(t > 0.0) {
        return Err(Error::arg("graded_mesh needs t > 0"));
    }
    let panels = nodes.div_ceil(8).max(2);
    let rl = (1.0 / (1.0 - a)).min(8.0);
    let rr = (1.0 / (1.0 - b)).min(8.0);
    let map = |u: f64| {
        if u <= 0.5 {
            0.5 * (2.0 * u).powf(rl)
        } else {
            1.0 - 0.5 * (2.0 * (1.0 - u)).powf(rr)
        }
    };
    let mut q = Quadrature { nodes: Vec::with_capacity(nodes), weights: Vec::with_capacity(nodes) };
    for p in 0..panels {
        let order = nodes / panels + usize::from(p < nodes % panels);
        let lo = t * map(p as f64 / panels as f64);
        let hi = if p + 1 == panels { t } else { t * map((p + 1) as f64 / panels as f64) };
        let (gx, _) = gauss_legendre(order);
        let mom = panel_moments(lo, hi, t, a, b, order);
        let w = solve_weights(&gx, &mom);
        for (x, wi) in gx.iter().zip(w) {
            q.nodes.push(lo + 0.5 * (x + 1.0) * (hi - lo));
            q.weights.push(wi);
        }
    }
    Ok(q)
}
