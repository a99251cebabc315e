//! The six Duhamel operators
//!
//! ```text
//! B112(n,c)  = ∫₀ᵗ ∇·e^{(t−s)Δ}(n∇c)        B113(n,ζ) = ∫₀ᵗ ∇·e^{(t−s)Δ}(n S∗ζ)
//! B223(c,ζ)  = ∫₀ᵗ e^{(t−s)Δ}((S∗ζ)·∇c)     B212(n,c) = ∫₀ᵗ e^{(t−s)Δ}(nc)
//! B333(ζ,ζ̃) = ∫₀ᵗ ∇·e^{(t−s)Δ}(ζ S∗ζ̃)      L13(n)    = ∫₀ᵗ ∇^⊥·e^{(t−s)Δ}(n∇φ)
//! ```
//!
//! evaluated over stored trajectories. Every quadrature node forms the
//! dealiased product, applies the kernel in doubled-domain Fourier space and
//! accumulates; one inverse transform per output finishes the integral.

mod quadrature;
mod trajectory;

pub use quadrature::{gauss_legendre, graded_mesh, Quadrature};
pub use trajectory::{Component, NodeFields, TimeMesh, Trajectory, XNorms};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::condition_a::KatoIndices;
use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::spectral::{spectral, Spectral};

const I: C = C { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DuhamelOpId {
    B112,
    B113,
    B223,
    B212,
    B333,
    L13,
}

impl DuhamelOpId {
    pub const ALL: [DuhamelOpId; 6] = [
        DuhamelOpId::B112,
        DuhamelOpId::B113,
        DuhamelOpId::B223,
        DuhamelOpId::B212,
        DuhamelOpId::B333,
        DuhamelOpId::L13,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DuhamelOpId::B112 => "B112",
            DuhamelOpId::B113 => "B113",
            DuhamelOpId::B223 => "B223",
            DuhamelOpId::B212 => "B212",
            DuhamelOpId::B333 => "B333",
            DuhamelOpId::L13 => "L13",
        }
    }

    /// Target component of the output (1 = n, 2 = c, 3 = ζ).
    pub fn target(self) -> usize {
        match self {
            DuhamelOpId::B112 | DuhamelOpId::B113 => 1,
            DuhamelOpId::B223 | DuhamelOpId::B212 => 2,
            DuhamelOpId::B333 | DuhamelOpId::L13 => 3,
        }
    }

    /// Input components `(i, j)` of `B^k_{ij}`; `L13` reads only `n`.
    pub fn inputs(self) -> (usize, usize) {
        match self {
            DuhamelOpId::B112 => (1, 2),
            DuhamelOpId::B113 => (1, 3),
            DuhamelOpId::B223 => (2, 3),
            DuhamelOpId::B212 => (1, 2),
            DuhamelOpId::B333 => (3, 3),
            DuhamelOpId::L13 => (1, 1),
        }
    }

    /// `(a, b)` in the bound `s^{−a}(t−s)^{−b}` of the integrand in Kato norms.
    pub fn endpoint_exponents(self, idx: &KatoIndices) -> (f64, f64) {
        let KatoIndices { p1, p2, p3, alpha1: a1, alpha2: a2, alpha3: a3 } = *idx;
        match self {
            DuhamelOpId::B112 => (a1 + a2, 0.5 + 1.0 / p2),
            DuhamelOpId::B113 => (a1 + a3, 1.0 / p3),
            DuhamelOpId::B223 => (a2 + a3, 1.0 / p3),
            DuhamelOpId::B212 => (a1, 1.0 / p1),
            DuhamelOpId::B333 => (2.0 * a3, 1.0 / p3),
            DuhamelOpId::L13 => (a1, 1.0 - 1.0 / p3 + 1.0 / p1),
        }
    }
}

/// Integrand of one output at one time: a scalar under `e^{(t−s)Δ}` or a
/// vector flux under `∇·e^{(t−s)Δ}`.
pub(crate) enum Source {
    Plain(Vec<f64>),
    Div(Vec<f64>, Vec<f64>),
}

/// Time quadrature settings for operator evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Gauss–Legendre points per panel.
    pub order: usize,
    /// Halve the panel touching `s = t` until it is shorter than this
    /// (defaults to the grid diffusion time `h²`).
    pub refine_to: Option<f64>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { order: 4, refine_to: None }
    }
}

/// Panels aligned with the trajectory nodes below `t`, Gauss–Legendre nodes
/// inside, and geometric refinement toward the kernel endpoint `s = t`.
pub fn time_rule(times: &[f64], t: f64, opts: &QuadratureOptions, grid: &GridSpec) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    edges.extend(times.iter().copied().filter(|&s| s < t));
    let last_lo = *edges.last().expect("non-empty");
    let floor = opts.refine_to.unwrap_or(grid.cell_area());
    let mut gap = t - last_lo;
    let mut tail = Vec::new();
    while gap > floor && tail.len() < 40 {
        gap *= 0.5;
        tail.push(t - gap);
    }
    edges.extend(tail);
    edges.push(t);
    let (gx, gw) = gauss_legendre(opts.order.max(1));
    let mut rule = Vec::with_capacity(edges.len() * gx.len());
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        for (x, wt) in gx.iter().zip(&gw) {
            rule.push((lo + 0.5 * (x + 1.0) * (hi - lo), 0.5 * (hi - lo) * wt));
        }
    }
    rule
}

/// Accumulates `Σ_q w_q e^{(t−s_q)Δ} K[source_q]` for each output slot.
pub(crate) struct Accumulator {
    sp: std::sync::Arc<Spectral>,
    t: f64,
    acc: Vec<Vec<C>>,
}

impl Accumulator {
    pub(crate) fn new(grid: &GridSpec, t: f64, outputs: usize) -> Self {
        let sp = spectral(grid);
        let mm = sp.m * sp.m;
        Accumulator { sp, t, acc: (0..outputs).map(|_| vec![C::default(); mm]).collect() }
    }

    pub(crate) fn add(&mut self, s: f64, weight: f64, sources: Vec<Source>) {
        debug_assert_eq!(sources.len(), self.acc.len());
        let sp = self.sp.clone();
        // pack real arrays two per transform
        let mut reals: Vec<&[f64]> = Vec::new();
        for src in &sources {
            match src {
                Source::Plain(f) => reals.push(f),
                Source::Div(f1, f2) => {
                    reals.push(f1);
                    reals.push(f2);
                }
            }
        }
        let mut specs: Vec<Vec<C>> = Vec::with_capacity(reals.len());
        for pair in reals.chunks(2) {
            if pair.len() == 2 {
                let (a, b) = sp.forward2(pair[0], pair[1]);
                specs.push(a);
                specs.push(b);
            } else {
                specs.push(sp.forward1(pair[0]));
            }
        }
        let e = sp.heat_axis(self.t - s);
        let keep = sp.keep_axis();
        let m = sp.m;
        let mut k = 0;
        for (slot, src) in sources.iter().enumerate() {
            let acc = &mut self.acc[slot];
            match src {
                Source::Plain(_) => {
                    let f = &specs[k];
                    k += 1;
                    for b in 0..m {
                        if !keep[b] {
                            continue;
                        }
                        let eb = weight * e[b];
                        for a in 0..m {
                            if keep[a] {
                                let idx = b * m + a;
                                acc[idx] += f[idx] * (eb * e[a]);
                            }
                        }
                    }
                }
                Source::Div(_, _) => {
                    let (f1, f2) = (&specs[k], &specs[k + 1]);
                    k += 2;
                    for b in 0..m {
                        if !keep[b] {
                            continue;
                        }
                        let eb = weight * e[b];
                        let kb = sp.kd_m[b];
                        for a in 0..m {
                            if keep[a] {
                                let idx = b * m + a;
                                let v = I * (f1[idx] * sp.kd_m[a] + f2[idx] * kb);
                                acc[idx] += v * (eb * e[a]);
                            }
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn finish(self, grid: &GridSpec) -> Vec<ScalarField> {
        let sp = self.sp;
        let mut out = Vec::with_capacity(self.acc.len());
        let mut it = self.acc.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => {
                    let (x, y) = sp.inverse2(&a, &b);
                    out.push(ScalarField::from_raw(*grid, x));
                    out.push(ScalarField::from_raw(*grid, y));
                }
                None => out.push(ScalarField::from_raw(*grid, sp.inverse1(a))),
            }
        }
        out
    }
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Integrand of `op` with the first slot read from `a` and the second from `b`.
fn op_source(op: DuhamelOpId, a: &NodeFields, b: &NodeFields, aux: Option<&VectorField>) -> Source {
    match op {
        DuhamelOpId::B112 => Source::Div(
            mul(a.n.values(), b.grad_c.x.values()),
            mul(a.n.values(), b.grad_c.y.values()),
        ),
        DuhamelOpId::B113 => Source::Div(mul(a.n.values(), b.u.x.values()), mul(a.n.values(), b.u.y.values())),
        DuhamelOpId::B223 => Source::Plain(
            b.u.x
                .values()
                .iter()
                .zip(b.u.y.values())
                .zip(a.grad_c.x.values().iter().zip(a.grad_c.y.values()))
                .map(|((u1, u2), (g1, g2))| u1 * g1 + u2 * g2)
                .collect(),
        ),
        DuhamelOpId::B212 => Source::Plain(mul(a.n.values(), b.c.values())),
        DuhamelOpId::B333 => Source::Div(
            mul(a.zeta.values(), b.u.x.values()),
            mul(a.zeta.values(), b.u.y.values()),
        ),
        DuhamelOpId::L13 => {
            let g = aux.expect("checked by caller");
            // ∇^⊥·F = ∇·(F₂, −F₁)
            Source::Div(
                mul(a.n.values(), g.y.values()),
                a.n.values().iter().zip(g.x.values()).map(|(n, g1)| -n * g1).collect(),
            )
        }
    }
}

fn check_time(traj: &Trajectory, t: f64) -> Result<()> {
    let last = *traj.times().last().expect("trajectory has nodes");
    if !(t >= 0.0) || t > last * (1.0 + 1e-12) {
        return Err(Error::arg(format!("time {t} outside [0, {last}]")));
    }
    Ok(())
}

/// `B(a_slot1, b_slot2)(t)` for two trajectories on the same mesh.
pub fn duhamel_apply_bilinear(
    op: DuhamelOpId,
    a: &Trajectory,
    b: &Trajectory,
    aux: Option<&VectorField>,
    t: f64,
    opts: &QuadratureOptions,
) -> Result<ScalarField> {
    a.grid().check(b.grid())?;
    if a.times() != b.times() {
        return Err(Error::arg("trajectories must share time nodes"));
    }
    check_time(a, t)?;
    if op == DuhamelOpId::L13 {
        match aux {
            Some(g) => a.grid().check(g.grid())?,
            None => return Err(Error::arg("L13 needs the potential gradient ∇φ")),
        }
    }
    let grid = *a.grid();
    if t == 0.0 {
        return Ok(ScalarField::zeros(grid));
    }
    let mut acc = Accumulator::new(&grid, t, 1);
    for (s, w) in time_rule(a.times(), t, opts, &grid) {
        let fa = a.interpolate(s);
        let fb = if std::ptr::eq(a, b) { None } else { Some(b.interpolate(s)) };
        let src = op_source(op, &fa, fb.as_ref().unwrap_or(&fa), aux);
        acc.add(s, w, vec![src]);
    }
    Ok(acc.finish(&grid).pop().expect("one output"))
}

/// `op(traj, traj)(t)` per the operator's integrand recipe.
pub fn duhamel_apply(
    op: DuhamelOpId,
    traj: &Trajectory,
    aux: Option<&VectorField>,
    t: f64,
) -> Result<ScalarField> {
    duhamel_apply_bilinear(op, traj, traj, aux, t, &QuadratureOptions::default())
}

/// Same as [`duhamel_apply`] with explicit quadrature settings.
pub fn duhamel_apply_with(
    op: DuhamelOpId,
    traj: &Trajectory,
    aux: Option<&VectorField>,
    t: f64,
    opts: &QuadratureOptions,
) -> Result<ScalarField> {
    duhamel_apply_bilinear(op, traj, traj, aux, t, opts)
}

/// The three right-hand sides of the Picard map at `t`:
/// `(B112 + B113, B223 + B212, B333 − L13)`.
pub(crate) fn picard_terms(
    traj: &Trajectory,
    aux: Option<&VectorField>,
    t: f64,
    opts: &QuadratureOptions,
) -> [ScalarField; 3] {
    let grid = *traj.grid();
    if t == 0.0 {
        return [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)];
    }
    let mut acc = Accumulator::new(&grid, t, 3);
    for (s, w) in time_rule(traj.times(), t, opts, &grid) {
        let f = traj.interpolate(s);
        let n = f.n.values();
        let (g1, g2) = (f.grad_c.x.values(), f.grad_c.y.values());
        let (u1, u2) = (f.u.x.values(), f.u.y.values());
        let fn1: Vec<f64> = (0..n.len()).map(|k| n[k] * (g1[k] + u1[k])).collect();
        let fn2: Vec<f64> = (0..n.len()).map(|k| n[k] * (g2[k] + u2[k])).collect();
        let c = f.c.values();
        let sc: Vec<f64> = (0..n.len()).map(|k| n[k] * c[k] + u1[k] * g1[k] + u2[k] * g2[k]).collect();
        let z = f.zeta.values();
        let (mut gz1, mut gz2): (Vec<f64>, Vec<f64>) =
            ((0..n.len()).map(|k| z[k] * u1[k]).collect(), (0..n.len()).map(|k| z[k] * u2[k]).collect());
        if let Some(p) = aux {
            // subtract the L13 flux (n∂₂φ, −n∂₁φ)
            let (p1, p2) = (p.x.values(), p.y.values());
            for k in 0..n.len() {
                gz1[k] -= n[k] * p2[k];
                gz2[k] += n[k] * p1[k];
            }
        }
        acc.add(s, w, vec![Source::Div(fn1, fn2), Source::Plain(sc), Source::Div(gz1, gz2)]);
    }
    let mut out = acc.finish(&grid).into_iter();
    [out.next().unwrap(), out.next().unwrap(), out.next().unwrap()]
}

/// All six operators at `t` in one pass, ordered as [`DuhamelOpId::ALL`].
/// `L13` is zero when `aux` is absent.
pub fn duhamel_apply_all(
    traj: &Trajectory,
    aux: Option<&VectorField>,
    t: f64,
    opts: &QuadratureOptions,
) -> Result<Vec<ScalarField>> {
    check_time(traj, t)?;
    if let Some(g) = aux {
        traj.grid().check(g.grid())?;
    }
    let grid = *traj.grid();
    if t == 0.0 {
        return Ok(vec![ScalarField::zeros(grid); 6]);
    }
    let has_aux = aux.is_some();
    let zero = VectorField::zeros(grid);
    let aux = aux.unwrap_or(&zero);
    let mut acc = Accumulator::new(&grid, t, 6);
    for (s, w) in time_rule(traj.times(), t, opts, &grid) {
        let f = traj.interpolate(s);
        let src = DuhamelOpId::ALL.iter().map(|&op| op_source(op, &f, &f, Some(aux))).collect();
        acc.add(s, w, src);
    }
    let mut out = acc.finish(&grid);
    if !has_aux {
        // packed transforms leave round-off crosstalk in the unused slot
        out[5] = ScalarField::zeros(grid);
    }
    Ok(out)
}
