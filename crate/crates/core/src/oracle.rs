//! First-order IMEX stepper with exact diffusion:
//! `X_{k+1} = e^{dtΔ}(X_k + dt·N(X_k))`, all products dealiased.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::biot_savart::velocity;
use crate::duhamel::{NodeFields, TimeMesh, Trajectory};
use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::io::{read_field, write_field};
use crate::problem::InitialFields;
use crate::spectral::{gradient, spectral};

const I: C = C { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct StepperState {
    pub t: f64,
    pub n: ScalarField,
    pub c: ScalarField,
    pub zeta: ScalarField,
    pub u: VectorField,
}

impl StepperState {
    pub fn new(t: f64, n: ScalarField, c: ScalarField, zeta: ScalarField) -> Result<Self> {
        n.grid().check(c.grid())?;
        n.grid().check(zeta.grid())?;
        if !(n.is_finite() && c.is_finite() && zeta.is_finite()) {
            return Err(Error::arg("stepper state must be finite"));
        }
        let u = velocity(&zeta);
        Ok(StepperState { t, n, c, zeta, u })
    }

    pub fn from_initial(data: &InitialFields) -> Result<Self> {
        Self::new(0.0, data.n0.clone(), data.c0.clone(), data.zeta0.clone())
    }

    pub fn grid(&self) -> &GridSpec {
        self.n.grid()
    }

    /// Largest step allowed by `dt ≤ h/(4 max|u|)`.
    pub fn max_dt(&self) -> f64 {
        let umax = self.u.magnitude().max_abs();
        if umax > 0.0 {
            self.grid().spacing() / (4.0 * umax)
        } else {
            f64::INFINITY
        }
    }

    pub fn to_node(&self) -> Result<NodeFields> {
        NodeFields::new(self.n.clone(), self.c.clone(), self.zeta.clone())
    }
}

/// One step of length `dt`; rejects steps beyond the advective CFL bound.
pub fn imex_step(state: &StepperState, dt: f64, grad_phi: Option<&VectorField>) -> Result<StepperState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::arg(format!("time step must be positive, got {dt}")));
    }
    let max_dt = state.max_dt();
    if dt > max_dt {
        return Err(Error::Cfl { dt, max_dt });
    }
    let grid = *state.grid();
    if let Some(g) = grad_phi {
        grid.check(g.grid())?;
    }
    let sp = spectral(&grid);
    let (n, c, z) = (state.n.values(), state.c.values(), state.zeta.values());
    let (u1, u2) = (state.u.x.values(), state.u.y.values());
    let gc = gradient(&state.c);
    let (g1, g2) = (gc.x.values(), gc.y.values());
    let len = n.len();
    // n flux n(u + ∇c), c source u·∇c + nc, ζ flux ζu − (n∂₂φ, −n∂₁φ)
    let fn1: Vec<f64> = (0..len).map(|k| n[k] * (u1[k] + g1[k])).collect();
    let fn2: Vec<f64> = (0..len).map(|k| n[k] * (u2[k] + g2[k])).collect();
    let sc: Vec<f64> = (0..len).map(|k| u1[k] * g1[k] + u2[k] * g2[k] + c[k] * n[k]).collect();
    let mut gz1: Vec<f64> = (0..len).map(|k| z[k] * u1[k]).collect();
    let mut gz2: Vec<f64> = (0..len).map(|k| z[k] * u2[k]).collect();
    if let Some(p) = grad_phi {
        let (p1, p2) = (p.x.values(), p.y.values());
        for k in 0..len {
            gz1[k] -= n[k] * p2[k];
            gz2[k] += n[k] * p1[k];
        }
    }
    let (nh, ch) = sp.forward2(n, c);
    let (zh, f1) = sp.forward2(z, &fn1);
    let (f2, sh) = sp.forward2(&fn2, &sc);
    let (q1, q2) = sp.forward2(&gz1, &gz2);
    let e = sp.heat_axis(dt);
    let keep = sp.keep_axis();
    let m = sp.m;
    let mut out_nc = vec![C::default(); m * m];
    let mut out_z = vec![C::default(); m * m];
    for b in 0..m {
        let kb = sp.kd_m[b];
        for a in 0..m {
            let idx = b * m + a;
            let ka = sp.kd_m[a];
            let ee = e[a] * e[b];
            let (mut dn, mut dc, mut dz) = (C::default(), C::default(), C::default());
            if keep[a] && keep[b] {
                dn = I * (ka * f1[idx] + kb * f2[idx]);
                dc = sh[idx];
                dz = I * (ka * q1[idx] + kb * q2[idx]);
            }
            let new_n = (nh[idx] - dt * dn) * ee;
            let new_c = (ch[idx] - dt * dc) * ee;
            out_nc[idx] = new_n + I * new_c;
            out_z[idx] = (zh[idx] - dt * dz) * ee;
        }
    }
    let (nn, cn) = sp.inverse_packed(out_nc);
    let zn = sp.inverse1(out_z);
    StepperState::new(
        state.t + dt,
        ScalarField::from_raw(grid, nn),
        ScalarField::from_raw(grid, cn),
        ScalarField::from_raw(grid, zn),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointOptions {
    pub dir: PathBuf,
    /// Write a checkpoint after every `every` steps.
    pub every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub t: f64,
    pub step: usize,
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(rename = "N")]
    pub points: usize,
    pub n: String,
    pub c: String,
    pub zeta: String,
}

/// Writes `ckpt_<step>.json` plus three raw fields into `dir`.
pub fn write_checkpoint(dir: &Path, state: &StepperState, step: usize) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let stem = format!("ckpt_{step:08}");
    let mut names = Vec::new();
    for (name, f) in [("n", &state.n), ("c", &state.c), ("zeta", &state.zeta)] {
        let base = dir.join(format!("{stem}_{name}"));
        write_field(&base, f, state.t, name)?;
        names.push(format!("{stem}_{name}.f64"));
    }
    let manifest = CheckpointManifest {
        t: state.t,
        step,
        extent: state.grid().extent(),
        points: state.grid().points(),
        n: names[0].clone(),
        c: names[1].clone(),
        zeta: names[2].clone(),
    };
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Restores the state written by [`write_checkpoint`].
pub fn read_checkpoint(path: &Path) -> Result<(StepperState, usize)> {
    let m: CheckpointManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let (n, _) = read_field(&dir.join(&m.n))?;
    let (c, _) = read_field(&dir.join(&m.c))?;
    let (z, _) = read_field(&dir.join(&m.zeta))?;
    Ok((StepperState::new(m.t, n, c, z)?, m.step))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub dt: f64,
    pub checkpoint: Option<CheckpointOptions>,
}

impl OracleOptions {
    pub fn new(dt: f64) -> Self {
        OracleOptions { dt, checkpoint: None }
    }
}

/// Steps from `state` through every target time, shortening the step that
/// would overshoot a target so each one is hit exactly.
pub fn run_from(
    state: StepperState,
    targets: &[f64],
    grad_phi: Option<&VectorField>,
    opts: &OracleOptions,
) -> Result<(Vec<StepperState>, StepperState)> {
    let mut s = state;
    let mut step = 0;
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        if t < s.t {
            return Err(Error::arg(format!("target {t} lies before the state time {}", s.t)));
        }
        while s.t < t {
            let rest = t - s.t;
            let last = rest <= opts.dt * (1.0 + 1e-9);
            let dt = if last { rest } else { opts.dt };
            let mut next = imex_step(&s, dt, grad_phi)?;
            if last {
                next.t = t;
            }
            s = next;
            step += 1;
            if let Some(ck) = &opts.checkpoint {
                if ck.every > 0 && step % ck.every == 0 {
                    write_checkpoint(&ck.dir, &s, step)?;
                }
            }
        }
        out.push(s.clone());
    }
    Ok((out, s))
}

/// IMEX trajectory sampled on the mesh nodes.
pub fn run_oracle(
    data: &InitialFields,
    mesh: &TimeMesh,
    opts: &OracleOptions,
) -> Result<Trajectory> {
    let init = StepperState::from_initial(data)?;
    let (states, _) = run_from(init, &mesh.times, data.grad_phi.as_ref(), opts)?;
    let nodes = states.iter().map(StepperState::to_node).collect::<Result<Vec<_>>>()?;
    let initial = NodeFields::new(data.n0.clone(), data.c0.clone(), data.zeta0.clone())?;
    Trajectory::new(mesh, initial, nodes)
}
