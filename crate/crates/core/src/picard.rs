//! Fixed-point iteration `x ↦ Φ(x) = y − B(x)` on trajectories in Kato norms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::condition_a::{c0_threshold, contraction_budget, validate, BetaFactors, ContractionBudget, KatoIndices};
use crate::duhamel::{duhamel_apply_all, picard_terms, DuhamelOpId, NodeFields, QuadratureOptions, TimeMesh, Trajectory, XNorms};
use crate::error::{Error, Result};
use crate::field::lp_norm_vector;
use crate::io::{num, write_csv};
use crate::par::par_map;
use crate::problem::{InitialFields, ProblemData};
use crate::spectral::heat_propagate_pair;
use crate::spectral::heat_propagate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Consecutive ratios `≥ 1` that count as divergence.
    pub divergence_window: usize,
    /// Master constant for the budget; measured on the seed when absent.
    pub c_master: Option<f64>,
    pub quadrature: QuadratureOptions,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-6,
            max_iter: 40,
            max_halvings: 5,
            divergence_window: 3,
            c_master: None,
            quadrature: QuadratureOptions::default(),
        }
    }
}

/// One row of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardIterate {
    pub iter: usize,
    pub increment: XNorms,
    /// `‖Δᵏ‖_X / ‖Δᵏ⁻¹‖_X`; absent for the first increment.
    pub ratio: Option<f64>,
    /// `‖xᵏ⁺¹‖_X`.
    pub norm: f64,
    pub in_ball: Option<bool>,
}

/// `‖B(a,b)‖_{X_k} / (β-part · ‖a‖‖b‖)` per operator on the seed trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredConstants {
    pub ratios: Vec<(DuhamelOpId, f64)>,
    pub c_master: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub indices: KatoIndices,
    pub horizon: f64,
    pub halvings: usize,
    pub level: usize,
    pub iterates: Vec<PicardIterate>,
    pub converged: bool,
    pub seed_norms: XNorms,
    pub seed_norm: f64,
    pub final_norms: XNorms,
    /// `‖x − Φ(x)‖` for the returned trajectory.
    pub residual: XNorms,
    pub measured: Option<MeasuredConstants>,
    pub budget: Option<ContractionBudget>,
    /// `seed_norm ≤ ε_max`: the invariant-ball guarantee applies.
    pub within_eps_max: bool,
    pub ball_radius: Option<f64>,
    pub c0_sup: f64,
    pub warnings: Vec<String>,
    /// Which data regime the run fell in; uniqueness is not asserted.
    pub regime: String,
}

impl PicardReport {
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.iterates.iter().filter_map(|i| i.ratio).collect()
    }

    /// `iter, ‖Δn‖_X1, ‖Δc‖_X2, ‖Δζ‖_X3, ratio`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .iterates
            .iter()
            .map(|it| {
                vec![
                    it.iter.to_string(),
                    num(it.increment.x1),
                    num(it.increment.x2),
                    num(it.increment.x3),
                    it.ratio.map(num).unwrap_or_default(),
                ]
            })
            .collect();
        write_csv(path, &["iter", "dn_X1", "dc_X2", "dzeta_X3", "ratio"], &rows)
    }
}

#[derive(Clone, Debug)]
pub struct MildSolution {
    pub trajectory: Trajectory,
    pub report: PicardReport,
}

impl MildSolution {
    pub fn iterations(&self) -> usize {
        self.report.iterates.len()
    }

    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.report.contraction_ratios()
    }

    pub fn kato_norms(&self) -> XNorms {
        self.report.final_norms
    }

    pub fn seed_norm(&self) -> f64 {
        self.report.seed_norm
    }
}

/// Free heat evolution `(e^{tΔ}n₀, e^{tΔ}c₀, e^{tΔ}ζ₀)` at every node.
pub fn seed_trajectory(data: &InitialFields, mesh: &TimeMesh) -> Result<Trajectory> {
    data.check_signs()?;
    let nodes = par_map(&mesh.times, |&t| -> Result<NodeFields> {
        let (n, c) = heat_propagate_pair(&data.n0, &data.c0, t)?;
        let z = heat_propagate(&data.zeta0, t)?;
        NodeFields::new(n, c, z)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let init = NodeFields::new(data.n0.clone(), data.c0.clone(), data.zeta0.clone())?;
    Trajectory::new(mesh, init, nodes)
}

/// `Φ(x) = y − (B112 + B113, B223 + B212, B333 − L13)(x)` on the nodes of `seed`.
pub fn picard_map(
    x: &Trajectory,
    seed: &Trajectory,
    data: &InitialFields,
    opts: &QuadratureOptions,
) -> Result<Trajectory> {
    let aux = data.grad_phi.as_ref();
    let nodes = par_map(&(0..seed.len()).collect::<Vec<_>>(), |&k| -> Result<NodeFields> {
        let t = seed.times()[k];
        let [bn, bc, bz] = picard_terms(x, aux, t, opts);
        let y = seed.node(k);
        NodeFields::new(y.n.sub(&bn)?, y.c.sub(&bc)?, y.zeta.sub(&bz)?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Trajectory::new(&seed.mesh(), seed.initial().clone(), nodes)
}

/// Measures the master constant of every operator on `traj`.
pub fn measure_constants(
    traj: &Trajectory,
    data: &InitialFields,
    idx: &KatoIndices,
    opts: &QuadratureOptions,
) -> Result<Option<MeasuredConstants>> {
    let aux = data.grad_phi.as_ref();
    let per_node = par_map(traj.times(), |&t| duhamel_apply_all(traj, aux, t, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let norms = traj.x_norms(idx)?;
    let beta = BetaFactors::of(idx);
    let grad_phi_l2 = data.grad_phi.as_ref().map(|g| lp_norm_vector(g, 2.0)).transpose()?.unwrap_or(0.0);
    let mut ratios = Vec::new();
    for (o, op) in DuhamelOpId::ALL.iter().enumerate() {
        let outputs: Vec<NodeFields> = per_node
            .iter()
            .map(|fs| {
                let f = fs[o].clone();
                let z = crate::field::ScalarField::zeros(*traj.grid());
                match op.target() {
                    1 => NodeFields::new(f, z.clone(), z),
                    2 => NodeFields::new(z.clone(), f, z),
                    _ => NodeFields::new(z.clone(), z, f),
                }
            })
            .collect::<Result<_>>()?;
        let out = Trajectory::new(&traj.mesh(), NodeFields::zeros(*traj.grid()), outputs)?;
        let on = out.x_norms(idx)?;
        let lhs = [on.x1, on.x2, on.x3][op.target() - 1];
        let x = [norms.x1, norms.x2, norms.x3];
        let (i, j) = op.inputs();
        let (b, rhs) = match op {
            DuhamelOpId::B112 => (beta.b112, x[i - 1] * x[j - 1]),
            DuhamelOpId::B113 => (beta.b113, x[i - 1] * x[j - 1]),
            DuhamelOpId::B223 => (beta.b223, x[i - 1] * x[j - 1]),
            DuhamelOpId::B212 => (beta.b212, x[i - 1] * x[j - 1]),
            DuhamelOpId::B333 => (beta.b333, x[i - 1] * x[j - 1]),
            DuhamelOpId::L13 => (beta.l13, grad_phi_l2 * x[0]),
        };
        let denom = b * rhs;
        if denom > 0.0 && denom.is_finite() && lhs.is_finite() {
            ratios.push((*op, lhs / denom));
        }
    }
    let c_master = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    if c_master > 0.0 {
        Ok(Some(MeasuredConstants { ratios, c_master }))
    } else {
        Ok(None)
    }
}

/// Builds the seed, budget and report header for one horizon.
struct Attempt {
    seed: Trajectory,
    report: PicardReport,
}

fn prepare(data: &InitialFields, idx: &KatoIndices, mesh: &TimeMesh, opts: &PicardOptions) -> Result<Attempt> {
    let seed = seed_trajectory(data, mesh)?;
    let seed_norms = seed.x_norms(idx)?;
    let seed_norm = seed_norms.total();
    let measured = match opts.c_master {
        Some(_) => None,
        None => measure_constants(&seed, data, idx, &opts.quadrature)?,
    };
    let c_master = opts.c_master.or(measured.as_ref().map(|m| m.c_master)).unwrap_or(1.0);
    let budget = contraction_budget(idx, data.grad_phi_l2(), c_master)?;
    let within = seed_norm <= budget.eps_max;
    let c0_sup = data.c0_sup();
    let mut warnings = Vec::new();
    let thr = c0_threshold(idx.p1.max(idx.p3));
    if c0_sup > thr {
        warnings.push(format!("‖c0‖∞ = {c0_sup:.3e} exceeds the smallness level {thr:.3e}"));
    }
    if !within {
        warnings.push(format!(
            "seed norm {seed_norm:.3e} exceeds eps_max {:.3e}: the invariant-ball guarantee does not apply",
            budget.eps_max
        ));
    }
    let atomic = data.n0.max_abs() * mesh.times[0] > 1.0 || data.zeta0.max_abs() * mesh.times[0] > 1.0;
    let regime = if atomic {
        "concentrated data (atomic part not small at the first node); uniqueness not asserted".to_string()
    } else {
        "small/diffuse data".to_string()
    };
    let report = PicardReport {
        indices: *idx,
        horizon: mesh.horizon(),
        halvings: 0,
        level: data.level,
        iterates: Vec::new(),
        converged: false,
        seed_norms,
        seed_norm,
        final_norms: seed_norms,
        residual: XNorms::default(),
        measured,
        ball_radius: within.then(|| budget.ball_radius(seed_norm)),
        budget: Some(budget),
        within_eps_max: within,
        c0_sup,
        warnings,
        regime,
    };
    Ok(Attempt { seed, report })
}

#[allow(clippy::large_enum_variant)]
enum Outcome {
    Done(MildSolution),
    Diverged(PicardReport),
}

fn iterate(data: &InitialFields, idx: &KatoIndices, attempt: Attempt, opts: &PicardOptions) -> Result<Outcome> {
    let Attempt { seed, mut report } = attempt;
    let mut x = seed.clone();
    let mut prev: Option<f64> = None;
    let mut streak = 0;
    for k in 1..=opts.max_iter {
        let next = picard_map(&x, &seed, data, &opts.quadrature)?;
        let inc = next.x_distance(&x, idx)?;
        let d = inc.total();
        let norm = next.x_norms(idx)?.total();
        let ratio = prev.map(|p| if p > 0.0 { d / p } else if d > 0.0 { f64::INFINITY } else { 0.0 });
        let in_ball = report.ball_radius.map(|r| norm <= r);
        report.iterates.push(PicardIterate { iter: k, increment: inc, ratio, norm, in_ball });
        x = next;
        if !d.is_finite() || !x.is_finite() {
            return Ok(Outcome::Diverged(report));
        }
        match ratio {
            Some(r) if r >= 1.0 => streak += 1,
            _ => streak = 0,
        }
        if streak >= opts.divergence_window {
            return Ok(Outcome::Diverged(report));
        }
        if d < opts.tol {
            report.converged = true;
            break;
        }
        prev = Some(d);
    }
    let check = picard_map(&x, &seed, data, &opts.quadrature)?;
    report.residual = check.x_distance(&x, idx)?;
    report.final_norms = x.x_norms(idx)?;
    Ok(Outcome::Done(MildSolution { trajectory: x, report }))
}

/// Picard iteration on pre-discretized data, halving the horizon on divergence.
pub fn solve_picard_fields(
    data: &InitialFields,
    idx: &KatoIndices,
    mesh: &TimeMesh,
    opts: &PicardOptions,
) -> Result<MildSolution> {
    let v = validate(idx)?;
    if !v.pass {
        let names: Vec<_> = v.failures().map(|c| c.name.clone()).collect();
        return Err(Error::Inadmissible(names.join(", ")));
    }
    let mut mesh = mesh.clone();
    let mut halvings = 0;
    loop {
        let mut attempt = prepare(data, idx, &mesh, opts)?;
        attempt.report.halvings = halvings;
        match iterate(data, idx, attempt, opts)? {
            Outcome::Done(sol) => return Ok(sol),
            Outcome::Diverged(report) => {
                if halvings >= opts.max_halvings {
                    return Err(Error::Diverged(Box::new(report)));
                }
                halvings += 1;
                mesh = mesh.rescaled(0.5 * mesh.horizon());
            }
        }
    }
}

/// Mollifies the measure data and runs [`solve_picard_fields`].
pub fn solve_picard(
    data: &ProblemData,
    idx: &KatoIndices,
    mesh: &TimeMesh,
    opts: &PicardOptions,
) -> Result<MildSolution> {
    let fields = data.discretize()?;
    solve_picard_fields(&fields, idx, mesh, opts)
}
