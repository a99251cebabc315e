//! Checks of conservation, sign, maximum principle, scaling, the vorticity
//! bound, weak initial convergence and the atomic seminorm, collected in a
//! ledger.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::duhamel::{TimeMesh, Trajectory};
use crate::error::{Error, Result};
use crate::field::{lp_norm, lp_norm_vector, ScalarField};
use crate::io::{num, write_csv};
use crate::measures::{mollifier_heat_age, mollifier_level, weak_pairing, RadonMeasureSpec, TestFunction};
use crate::problem::InitialFields;
use crate::spectral::heat_propagate;

/// How the measured value relates to the claimed bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub name: String,
    pub claimed_bound: f64,
    pub relation: Relation,
    pub measured_value: f64,
    pub pass: bool,
    pub anchor: String,
}

impl DiagnosticRecord {
    pub fn at_most(name: &str, measured: f64, bound: f64, anchor: &str) -> Self {
        DiagnosticRecord {
            name: name.into(),
            claimed_bound: bound,
            relation: Relation::AtMost,
            measured_value: measured,
            pass: measured <= bound,
            anchor: anchor.into(),
        }
    }

    pub fn at_least(name: &str, measured: f64, bound: f64, anchor: &str) -> Self {
        DiagnosticRecord {
            name: name.into(),
            claimed_bound: bound,
            relation: Relation::AtLeast,
            measured_value: measured,
            pass: measured >= bound,
            anchor: anchor.into(),
        }
    }
}

pub const PLUMBING: &str = "plumbing";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticLedger {
    pub records: Vec<DiagnosticRecord>,
    pub notes: Vec<String>,
}

impl DiagnosticLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: DiagnosticRecord) {
        self.records.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = DiagnosticRecord>) {
        self.records.extend(rs);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &DiagnosticRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn get(&self, name: &str) -> Option<&DiagnosticRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        if let Some(d) = path.parent() {
            if !d.as_os_str().is_empty() {
                fs::create_dir_all(d)?;
            }
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .records
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    match r.relation {
                        Relation::AtMost => "<=".into(),
                        Relation::AtLeast => ">=".into(),
                    },
                    num(r.claimed_bound),
                    num(r.measured_value),
                    r.pass.to_string(),
                    format!("\"{}\"", r.anchor.replace('"', "'")),
                ]
            })
            .collect();
        write_csv(path, &["name", "relation", "claimed_bound", "measured_value", "pass", "anchor"], &rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationTolerances {
    /// Relative mass drift of `n`.
    pub mass: f64,
    /// `min n ≥ −tol · sup|n₀|`.
    pub min_n: f64,
    /// `min c ≥ −tol · ‖c₀‖_∞`.
    pub min_c: f64,
    /// Absolute slack for `‖c(t)‖_∞` nonincreasing.
    pub c_sup: f64,
}

impl Default for ConservationTolerances {
    fn default() -> Self {
        ConservationTolerances { mass: 1e-4, min_n: 1e-6, min_c: 1e-6, c_sup: 1e-8 }
    }
}

/// Mass drift of `n`, minima of `n` and `c`, and monotonicity of `‖c‖_∞`.
pub fn check_conservation_and_sign(traj: &Trajectory, tol: &ConservationTolerances) -> Vec<DiagnosticRecord> {
    let init = traj.initial();
    let m0 = init.n.integral();
    let n_scale = init.n.max_abs();
    let c_scale = init.c.max_abs();
    let mut drift: f64 = 0.0;
    let mut min_n: f64 = 0.0;
    let mut min_c: f64 = 0.0;
    let mut rise: f64 = 0.0;
    let mut prev_sup = c_scale;
    for f in traj.nodes() {
        let m = f.n.integral();
        let d = if m0.abs() > 0.0 { (m - m0).abs() / m0.abs() } else { (m - m0).abs() };
        drift = drift.max(d);
        if n_scale > 0.0 {
            min_n = min_n.min(f.n.min() / n_scale);
        } else {
            min_n = min_n.min(f.n.min());
        }
        if c_scale > 0.0 {
            min_c = min_c.min(f.c.min() / c_scale);
        } else {
            min_c = min_c.min(f.c.min());
        }
        let s = f.c.max_abs();
        rise = rise.max(s - prev_sup);
        prev_sup = s;
    }
    vec![
        DiagnosticRecord::at_most("mass drift of n", drift, tol.mass, "mass conservation of n"),
        DiagnosticRecord::at_least("min n (scale-relative)", min_n, -tol.min_n, "sign preservation of n for nonnegative data"),
        DiagnosticRecord::at_least("min c (scale-relative)", min_c, -tol.min_c, "sign preservation of c for nonnegative data"),
        DiagnosticRecord::at_most(
            "increase of sup c between nodes",
            rise,
            tol.c_sup,
            "maximum principle: sup c nonincreasing",
        ),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: f64,
    /// Sup over matched nodes and components of the relative L² discrepancy.
    pub discrepancy: Option<f64>,
    pub note: Option<String>,
}

impl ScalingReport {
    pub fn record(&self, bound: f64) -> Option<DiagnosticRecord> {
        self.discrepancy.map(|d| {
            DiagnosticRecord::at_most(
                &format!("scaling covariance (lambda = {})", self.lambda),
                d,
                bound,
                "invariance under the scaling map",
            )
        })
    }
}

/// Data `(λ²n₀(λx), c₀(λx), λ²ζ₀(λx))` on the grid of extent `L/λ`.
///
/// Grid point `i` of the rescaled grid sits at `x/λ`, so the rescaled data are
/// the original values with `n, ζ` multiplied by `λ²`.
pub fn rescale_data(data: &InitialFields, lambda: f64) -> Result<InitialFields> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::arg("scale factor must be positive"));
    }
    let grid = data.grid().rescaled(lambda)?;
    mollifier_level(&grid)?;
    let lam2 = lambda * lambda;
    let n0 = ScalarField::from_values(grid, data.n0.values().iter().map(|v| v * lam2).collect())?;
    let c0 = ScalarField::from_values(grid, data.c0.values().to_vec())?;
    let z0 = ScalarField::from_values(grid, data.zeta0.values().iter().map(|v| v * lam2).collect())?;
    InitialFields::new(n0, c0, z0, None)
}

fn rel_l2(a: &[f64], b: &[f64]) -> Option<f64> {
    let den: f64 = b.iter().map(|v| v * v).sum();
    if den == 0.0 {
        let num: f64 = a.iter().map(|v| v * v).sum();
        return if num == 0.0 { None } else { Some(f64::INFINITY) };
    }
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Some((num / den).sqrt())
}

/// Solves the base and the rescaled problem with `solve` and compares
/// `(λ²n, c, λ²ζ)(λx, λ²t)` with the rescaled solution at matched nodes.
pub fn check_scaling_covariance(
    data: &InitialFields,
    mesh: &TimeMesh,
    lambda: f64,
    solve: impl Fn(&InitialFields, &TimeMesh) -> Result<Trajectory>,
) -> Result<ScalingReport> {
    if data.grad_phi.is_some() {
        return Ok(ScalingReport {
            lambda,
            discrepancy: None,
            note: Some("skipped: a fixed potential is not scale-covariant".into()),
        });
    }
    let scaled = rescale_data(data, lambda)?;
    let base = solve(data, mesh)?;
    if lambda == 1.0 {
        return Ok(ScalingReport { lambda, discrepancy: Some(0.0), note: None });
    }
    let lam2 = lambda * lambda;
    let mesh_s = TimeMesh::from_times(mesh.times.iter().map(|t| t / lam2).collect())?;
    let other = solve(&scaled, &mesh_s)?;
    let mut worst: f64 = 0.0;
    for (a, b) in other.nodes().iter().zip(base.nodes()) {
        let pairs = [
            (a.n.values(), b.n.values(), lam2),
            (a.c.values(), b.c.values(), 1.0),
            (a.zeta.values(), b.zeta.values(), lam2),
        ];
        for (x, y, s) in pairs {
            let y: Vec<f64> = y.iter().map(|v| v * s).collect();
            if let Some(d) = rel_l2(x, &y) {
                worst = worst.max(d);
            }
        }
    }
    Ok(ScalingReport { lambda, discrepancy: Some(worst), note: None })
}

/// `C_{ζ,p}` for `p > 2`:
/// `C^p = e^{T(p−1)(p−2)/4}(‖ζ(σ)‖_p^p + T·(2(p−1)/4)‖∇φ‖_∞^p C_{n,p}^p)`.
pub fn zeta_bound_constant(p: f64, horizon: f64, zeta_sigma_p: f64, grad_phi_sup: f64, c_np: f64) -> f64 {
    let growth = (horizon * (p - 1.0) * (p - 2.0) / 4.0).exp();
    let forcing = horizon * (2.0 * (p - 1.0) / 4.0) * grad_phi_sup.powf(p) * c_np.powf(p);
    (growth * (zeta_sigma_p.powf(p) + forcing)).powf(1.0 / p)
}

/// Interpolation exponent `θ_p = (4−p)/(3p)` between `L¹` and `L⁴`.
pub fn theta(p: f64) -> f64 {
    (4.0 - p) / (3.0 * p)
}

/// `sup_{t ≥ σ} ‖ζ(t)‖_p ≤ C_{ζ,p}` with `C_{n,p}` measured on the run.
/// `sigma_node = None` starts from the initial data.
pub fn check_zeta_bound(
    traj: &Trajectory,
    p: f64,
    sigma_node: Option<usize>,
    grad_phi_sup: f64,
) -> Result<DiagnosticRecord> {
    if !(p > 1.0) {
        return Err(Error::arg("zeta bound needs p > 1"));
    }
    let horizon = *traj.times().last().expect("non-empty");
    let (start, zs) = match sigma_node {
        None => (0, &traj.initial().zeta),
        Some(k) => (k, &traj.node(k).zeta),
    };
    let later: Vec<_> = traj.nodes()[start..].iter().collect();
    let measured = later.iter().map(|f| lp_norm(&f.zeta, p)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    // packed transforms leak round-off from n into ζ; allow for it
    let n_scale = later.iter().map(|f| lp_norm(&f.n, p)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let bound = if p > 2.0 {
        let mut cnp = later.iter().map(|f| lp_norm(&f.n, p)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        if sigma_node.is_none() {
            cnp = cnp.max(lp_norm(&traj.initial().n, p)?);
        }
        zeta_bound_constant(p, horizon, lp_norm(zs, p)?, grad_phi_sup, cnp)
    } else {
        let mut cn4 = later.iter().map(|f| lp_norm(&f.n, 4.0)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        if sigma_node.is_none() {
            cn4 = cn4.max(lp_norm(&traj.initial().n, 4.0)?);
        }
        let c4 = zeta_bound_constant(4.0, horizon, lp_norm(zs, 4.0)?, grad_phi_sup, cn4);
        let th = theta(p);
        lp_norm(zs, 1.0)?.powf(th) * c4.powf(1.0 - th)
    };
    Ok(DiagnosticRecord::at_most(
        &format!("sup ||zeta||_{p} against C_zeta,{p}"),
        measured,
        bound * (1.0 + 1e-12) + 1e-12 * n_scale,
        if p > 2.0 { "vorticity Lp bound by Gronwall" } else { "vorticity Lp bound by L1-L4 interpolation" },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakConvergenceSeries {
    pub times: Vec<f64>,
    /// `|⟨n(t_k) − μ₀, ψ⟩|`.
    pub errors: Vec<f64>,
    /// `|⟨n₀ − μ₀, ψ⟩|` of the discretized data.
    pub floor: f64,
    /// Errors decrease as `t ↓ 0` and stay above the floor.
    pub monotone: bool,
}

impl WeakConvergenceSeries {
    pub fn record(&self) -> DiagnosticRecord {
        let worst = self
            .errors
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::NEG_INFINITY, f64::max);
        DiagnosticRecord {
            name: "weak initial convergence series".into(),
            claimed_bound: 0.0,
            relation: Relation::AtMost,
            measured_value: if worst.is_finite() { worst } else { 0.0 },
            pass: self.monotone,
            anchor: "weak-* convergence n(t) -> n0 as t -> 0+".into(),
        }
    }
}

/// `|⟨n(t) − μ₀, ψ⟩|` over the earliest `count` nodes.
pub fn check_weak_initial_convergence(
    traj: &Trajectory,
    mu0: &RadonMeasureSpec,
    psi: &TestFunction,
    count: usize,
) -> WeakConvergenceSeries {
    let exact = mu0.exact_pairing(psi);
    let k = count.min(traj.len());
    let times = traj.times()[..k].to_vec();
    let errors: Vec<f64> = traj.nodes()[..k].iter().map(|f| (weak_pairing(&f.n, psi) - exact).abs()).collect();
    let floor = (weak_pairing(&traj.initial().n, psi) - exact).abs();
    let slack = 1e-12 * (exact.abs() + floor).max(1e-300);
    let increasing = errors.windows(2).all(|w| w[1] + slack >= w[0]);
    let above = errors.first().is_none_or(|&e| e + slack >= floor);
    WeakConvergenceSeries { times, errors, floor, monotone: increasing && above }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub times: Vec<f64>,
    /// `t^α ‖e^{tΔ}f‖_p` at `times`.
    pub values: Vec<f64>,
    /// Aitken-extrapolated limit as `t ↓ 0`.
    pub limit: f64,
}

/// Aitken Δ² limit of `a₀, a₁, a₂` (ordered toward the limit).
fn aitken(a0: f64, a1: f64, a2: f64) -> f64 {
    let d1 = a2 - a1;
    let d0 = a1 - a0;
    let den = d1 - d0;
    if den.abs() <= 1e-14 * (a0.abs() + a1.abs() + a2.abs()) || (d1 / d0).abs() >= 1.0 {
        return a2;
    }
    a2 - d1 * d1 / den
}

/// `lim_{t↓0} t^α‖e^{tΔ}μ‖_p` over `t_k = t₀·2^k`, where `f = e^{age·Δ}μ`
/// (for mollified data, `age = τ_j`). Requires `t₀ ≥ age`.
pub fn estimate_atomic_seminorm(f: &ScalarField, age: f64, t0: f64, p: f64, alpha: f64, levels: usize) -> Result<SeminormEstimate> {
    if levels < 3 {
        return Err(Error::arg(format!("atomic seminorm needs at least 3 small-t levels, got {levels}")));
    }
    if !(t0 >= age && t0 > 0.0) {
        return Err(Error::arg(format!("first time {t0} must be positive and at least the data age {age}")));
    }
    let times: Vec<f64> = (0..levels).map(|k| t0 * 2f64.powi(k as i32)).collect();
    let values = times
        .iter()
        .map(|&t| Ok(t.powf(alpha) * lp_norm(&heat_propagate(f, t - age)?, p)?))
        .collect::<Result<Vec<f64>>>()?;
    let limit = aitken(values[2], values[1], values[0]).max(0.0);
    Ok(SeminormEstimate { times, values, limit })
}

/// [`estimate_atomic_seminorm`] for data mollified at level `j`.
pub fn estimate_atomic_seminorm_mollified(f: &ScalarField, p: f64, levels: usize) -> Result<SeminormEstimate> {
    let j = mollifier_level(f.grid())?;
    let age = mollifier_heat_age(j);
    estimate_atomic_seminorm(f, age, age, p, 1.0 - 1.0 / p, levels)
}

/// Same estimate from the earliest nodes of a trajectory component `n`.
pub fn estimate_atomic_seminorm_traj(traj: &Trajectory, p: f64, alpha: f64) -> Result<SeminormEstimate> {
    if traj.len() < 3 {
        return Err(Error::arg("atomic seminorm needs at least 3 small-t nodes"));
    }
    let times = traj.times()[..3].to_vec();
    let values = traj.nodes()[..3]
        .iter()
        .zip(&times)
        .map(|(f, t)| Ok(t.powf(alpha) * lp_norm(&f.n, p)?))
        .collect::<Result<Vec<f64>>>()?;
    let limit = aitken(values[2], values[1], values[0]).max(0.0);
    Ok(SeminormEstimate { times, values, limit })
}

/// Relative L² discrepancy of `(n, c, ζ)` between two trajectories on the
/// same mesh, node by node; a component that vanishes in both counts as 0.
pub fn trajectory_discrepancy(a: &Trajectory, b: &Trajectory) -> Result<Vec<(f64, [f64; 3])>> {
    a.grid().check(b.grid())?;
    if a.times() != b.times() {
        return Err(Error::arg("trajectories are sampled at different times"));
    }
    Ok(a.times()
        .iter()
        .zip(a.nodes().iter().zip(b.nodes()))
        .map(|(&t, (x, y))| {
            let d = |p: &ScalarField, q: &ScalarField| rel_l2(p.values(), q.values()).unwrap_or(0.0);
            (t, [d(&x.n, &y.n), d(&x.c, &y.c), d(&x.zeta, &y.zeta)])
        })
        .collect())
}

/// `sup_k t_k^α ‖∇c(t_k)‖_p` series; reported, not asserted.
pub fn grad_c_series(traj: &Trajectory, p: f64) -> Result<Vec<(f64, f64)>> {
    traj.times().iter().zip(traj.nodes()).map(|(&t, f)| Ok((t, lp_norm_vector(&f.grad_c, p)?))).collect()
}

/// Conservation, sign, maximum principle and vorticity bounds of one run.
pub fn standard_ledger(traj: &Trajectory, data: &InitialFields, tol: &ConservationTolerances) -> Result<DiagnosticLedger> {
    let mut ledger = DiagnosticLedger::new();
    ledger.extend(check_conservation_and_sign(traj, tol));
    let c0 = data.c0_sup();
    if c0 <= 1.0 / 96.0 {
        ledger.push(check_zeta_bound(traj, 4.0, None, data.grad_phi_sup())?);
        ledger.push(check_zeta_bound(traj, 1.5, None, data.grad_phi_sup())?);
    } else {
        ledger.note(format!("vorticity bound not checked: ||c0||_inf = {c0:.3e} > 1/96"));
    }
    Ok(ledger)
}
