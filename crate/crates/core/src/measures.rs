//! Finite Radon measures (atoms, filaments, densities) and their Gaussian
//! mollification `φ_j ∗ μ` with `φ_j(x) = j² φ(jx)`, `φ(x) = π⁻¹ e^{−|x|²}`.
//!
//! `φ_j` is the heat kernel at age `τ_j = 1/(4j²)`, so `e^{tΔ}(φ_j ∗ δ)` is
//! the heat kernel at time `t + τ_j`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};
use crate::io;
use crate::spectral::heat_propagate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: [f64; 2],
    pub w: f64,
}

/// Polyline carrying a uniform linear density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Filament {
    pub vertices: Vec<[f64; 2]>,
    pub density: f64,
}

impl Filament {
    pub fn length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }

    /// Closed regular polygon with `sides` edges approximating a circle.
    pub fn circle(center: [f64; 2], radius: f64, sides: usize, density: f64) -> Self {
        let vertices = (0..=sides)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / sides as f64;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect();
        Filament { vertices, density }
    }

    /// Arclength midpoints with spacing at most `step`, each with its weight.
    pub fn quadrature(&self, step: f64) -> Vec<([f64; 2], f64)> {
        let mut out = Vec::new();
        for w in self.vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            if len == 0.0 {
                continue;
            }
            let k = (len / step).ceil().max(1.0) as usize;
            let ds = len / k as f64;
            for i in 0..k {
                let s = (i as f64 + 0.5) / k as f64;
                out.push((
                    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                    self.density * ds,
                ));
            }
        }
        out
    }
}

/// Analytic Gaussian density `mass/(2πσ²) exp(−|x−center|²/(2σ²))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: [f64; 2],
    pub sigma: f64,
    pub mass: f64,
}

impl GaussianBump {
    pub fn new(center: [f64; 2], sigma: f64, mass: f64) -> Self {
        GaussianBump { center, sigma, mass }
    }

    /// Bump with the given peak value instead of mass.
    pub fn with_peak(center: [f64; 2], sigma: f64, peak: f64) -> Self {
        GaussianBump::new(center, sigma, peak * 2.0 * PI * sigma * sigma)
    }

    pub fn peak(&self) -> f64 {
        self.mass / (2.0 * PI * self.sigma * self.sigma)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let r2 = (x - self.center[0]).powi(2) + (y - self.center[1]).powi(2);
        self.peak() * (-r2 / (2.0 * s2)).exp()
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let s2 = self.sigma * self.sigma;
        let v = self.eval(x, y);
        [-(x - self.center[0]) / s2 * v, -(y - self.center[1]) / s2 * v]
    }

    /// Same bump after `e^{tΔ}`.
    pub fn evolved(&self, t: f64) -> Self {
        GaussianBump::new(self.center, (self.sigma * self.sigma + 2.0 * t).sqrt(), self.mass)
    }
}

/// Atoms + filaments + absolutely continuous part.
///
/// `gaussians` is an analytic density extension; `density` is a sampled field
/// (read from `density_file` when loaded from JSON).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RadonMeasureSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub filaments: Vec<Filament>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaussians: Vec<GaussianBump>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_file: Option<PathBuf>,
    #[serde(skip)]
    pub density: Option<ScalarField>,
}

impl RadonMeasureSpec {
    pub fn atom(x: [f64; 2], w: f64) -> Self {
        RadonMeasureSpec {
            atoms: vec![Atom { x, w }],
            ..Default::default()
        }
    }

    pub fn filament(f: Filament) -> Self {
        RadonMeasureSpec {
            filaments: vec![f],
            ..Default::default()
        }
    }

    pub fn gaussian(g: GaussianBump) -> Self {
        RadonMeasureSpec {
            gaussians: vec![g],
            ..Default::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.w == 0.0)
            && self.filaments.iter().all(|f| f.density == 0.0)
            && self.gaussians.iter().all(|g| g.mass == 0.0)
            && self.density.as_ref().is_none_or(|d| d.max_abs() == 0.0)
    }

    /// Parses the JSON form; `density_file` is resolved relative to `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut spec: RadonMeasureSpec = serde_json::from_str(text)?;
        spec.load_density(base)?;
        Ok(spec)
    }

    pub fn load_density(&mut self, base: Option<&Path>) -> Result<()> {
        if let Some(p) = &self.density_file {
            let path = match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p.clone(),
            };
            let (field, _) = io::read_field(&path)?;
            self.density = Some(field);
        }
        Ok(())
    }

    /// Total variation `Σ|dⱼ| + Σ|ρ|·length + ‖density‖₁`.
    pub fn total_variation(&self) -> f64 {
        self.atomic_tv()
            + self.filaments.iter().map(|f| f.density.abs() * f.length()).sum::<f64>()
            + self.gaussians.iter().map(|g| g.mass.abs()).sum::<f64>()
            + self.density.as_ref().map_or(0.0, |d| d.map(f64::abs).integral())
    }

    /// Total variation of the atomic part.
    pub fn atomic_tv(&self) -> f64 {
        self.atoms.iter().map(|a| a.w.abs()).sum()
    }

    /// Signed total mass.
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum::<f64>()
            + self.filaments.iter().map(|f| f.density * f.length()).sum::<f64>()
            + self.gaussians.iter().map(|g| g.mass).sum::<f64>()
            + self.density.as_ref().map_or(0.0, |d| d.integral())
    }

    /// Errors unless every support point lies in the central quarter.
    pub fn check_support(&self, grid: &GridSpec) -> Result<()> {
        let q = 0.25 * grid.extent();
        let inside = |p: [f64; 2]| p[0].abs() <= q && p[1].abs() <= q;
        for (k, a) in self.atoms.iter().enumerate() {
            if !inside(a.x) {
                return Err(Error::Schema {
                    path: format!("atoms[{k}].x"),
                    message: format!("outside the central quarter |x| <= {q}"),
                });
            }
        }
        for (k, f) in self.filaments.iter().enumerate() {
            if let Some(v) = f.vertices.iter().position(|v| !inside(*v)) {
                return Err(Error::Schema {
                    path: format!("filaments[{k}].vertices[{v}]"),
                    message: format!("outside the central quarter |x| <= {q}"),
                });
            }
        }
        for (k, g) in self.gaussians.iter().enumerate() {
            if !inside(g.center) {
                return Err(Error::Schema {
                    path: format!("gaussians[{k}].center"),
                    message: format!("outside the central quarter |x| <= {q}"),
                });
            }
        }
        if let Some(d) = &self.density {
            grid.check(d.grid())?;
        }
        Ok(())
    }

    /// Exact pairing `⟨μ, ψ⟩`; filaments by high-order Gauss quadrature,
    /// sampled densities by the grid sum.
    pub fn exact_pairing(&self, psi: &TestFunction) -> f64 {
        let mut s: f64 = self.atoms.iter().map(|a| a.w * psi.eval(a.x[0], a.x[1])).sum();
        let (gx, gw) = crate::duhamel::gauss_legendre(32);
        for f in &self.filaments {
            for w in f.vertices.windows(2) {
                let (a, b) = (w[0], w[1]);
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let pieces = (len / (0.25 * psi.sigma)).ceil().max(1.0) as usize;
                for p in 0..pieces {
                    for (x, wt) in gx.iter().zip(&gw) {
                        let u = (p as f64 + 0.5 * (x + 1.0)) / pieces as f64;
                        let pt = [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])];
                        s += f.density * psi.eval(pt[0], pt[1]) * 0.5 * wt * len / pieces as f64;
                    }
                }
            }
        }
        for g in &self.gaussians {
            // tensor trapezoid over ±10σ of the bump: spectrally accurate for smooth integrands
            let k = 400;
            let half = 10.0 * g.sigma;
            let d = 2.0 * half / k as f64;
            for i in 0..=k {
                let x = g.center[0] - half + i as f64 * d;
                for j in 0..=k {
                    let y = g.center[1] - half + j as f64 * d;
                    s += g.eval(x, y) * psi.eval(x, y) * d * d;
                }
            }
        }
        if let Some(dens) = &self.density {
            s += weak_pairing(dens, psi);
        }
        s
    }
}

/// Largest `j` with `1/j ≥ 4h`.
pub fn mollifier_level(grid: &GridSpec) -> Result<usize> {
    let j = (1.0 / (4.0 * grid.spacing())).floor();
    if j < 1.0 {
        return Err(Error::Unresolvable {
            j: 1,
            min_width: 4.0 * grid.spacing(),
            spacing: grid.spacing(),
        });
    }
    Ok(j as usize)
}

/// Heat age `τ_j = 1/(4j²)` of `φ_j`.
pub fn mollifier_heat_age(j: usize) -> f64 {
    0.25 / (j * j) as f64
}

/// Adds `weight · φ_j(· − center)` to `values`, restricted to where it exceeds e^{−40}.
fn deposit(values: &mut [f64], grid: &GridSpec, center: [f64; 2], weight: f64, j: f64) {
    let n = grid.points();
    let h = grid.spacing();
    let reach = 40f64.sqrt() / j;
    let lo = |c: f64| (((c - reach + 0.5 * grid.extent()) / h).floor().max(0.0)) as usize;
    let hi = |c: f64| ((((c + reach + 0.5 * grid.extent()) / h).ceil()) as usize + 1).min(n);
    let (i0, i1, j0, j1) = (lo(center[0]), hi(center[0]), lo(center[1]), hi(center[1]));
    if i0 >= i1 || j0 >= j1 {
        return;
    }
    let j2 = j * j;
    let ey: Vec<f64> = (j0..j1).map(|q| (-j2 * (grid.coord(q) - center[1]).powi(2)).exp()).collect();
    let amp = weight * j2 / PI;
    for i in i0..i1 {
        let ex = amp * (-j2 * (grid.coord(i) - center[0]).powi(2)).exp();
        let row = &mut values[i * n + j0..i * n + j1];
        for (v, e) in row.iter_mut().zip(&ey) {
            *v += ex * e;
        }
    }
}

/// `φ_j ∗ μ` sampled on `grid`. Analytic Gaussian parts are sampled as is.
pub fn mollify(mu: &RadonMeasureSpec, j: usize, grid: &GridSpec) -> Result<ScalarField> {
    if j == 0 || 1.0 / (j as f64) < 2.0 * grid.spacing() {
        return Err(Error::Unresolvable {
            j,
            min_width: 2.0 * grid.spacing(),
            spacing: grid.spacing(),
        });
    }
    mu.check_support(grid)?;
    let jf = j as f64;
    let mut values = vec![0.0; grid.len()];
    for a in &mu.atoms {
        deposit(&mut values, grid, a.x, a.w, jf);
    }
    let step = 0.5 * grid.spacing();
    for f in &mu.filaments {
        for (p, w) in f.quadrature(step) {
            deposit(&mut values, grid, p, w, jf);
        }
    }
    let mut field = ScalarField::from_raw(*grid, values);
    if !mu.gaussians.is_empty() {
        let g = ScalarField::from_fn(*grid, |x, y| mu.gaussians.iter().map(|b| b.eval(x, y)).sum());
        field = field.add(&g)?;
    }
    if let Some(d) = &mu.density {
        field = field.add(&heat_propagate(d, mollifier_heat_age(j))?)?;
    }
    Ok(field)
}

/// `ψ(x) = Σ c_ab (x₁−c₁)^a (x₂−c₂)^b · exp(−|x−c|²/(2σ²))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: [f64; 2],
    pub sigma: f64,
    /// `((a, b), c_ab)` monomial coefficients; empty means the constant 1.
    #[serde(default)]
    pub poly: Vec<((u32, u32), f64)>,
}

impl TestFunction {
    pub fn gaussian(center: [f64; 2], sigma: f64) -> Self {
        TestFunction { center, sigma, poly: Vec::new() }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let g = (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp();
        if self.poly.is_empty() {
            return g;
        }
        let p: f64 = self
            .poly
            .iter()
            .map(|&((a, b), c)| c * dx.powi(a as i32) * dy.powi(b as i32))
            .sum();
        p * g
    }

    pub fn sample(&self, grid: &GridSpec) -> ScalarField {
        ScalarField::from_fn(*grid, |x, y| self.eval(x, y))
    }
}

/// Discrete pairing `h² Σ f ψ`.
pub fn weak_pairing(f: &ScalarField, psi: &TestFunction) -> f64 {
    let grid = f.grid();
    let n = grid.points();
    let mut s = 0.0;
    for i in 0..n {
        let x = grid.coord(i);
        for j in 0..n {
            let v = f.values()[i * n + j];
            if v != 0.0 {
                s += v * psi.eval(x, grid.coord(j));
            }
        }
    }
    s * grid.cell_area()
}
