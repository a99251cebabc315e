//! FFT machinery: free-space heat propagation on a zero-padded 2N×2N domain and
//! periodic spectral derivatives on the N×N grid.
//!
//! Doubled-domain spectra are stored transposed, `spec[b * 2N + a]` with `a` the
//! x₁-frequency index and `b` the x₂-frequency index, which saves two transposes
//! per forward/inverse round trip.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField};

const I: C = C { re: 0.0, im: 1.0 };

pub(crate) struct Spectral {
    pub(crate) n: usize,
    pub(crate) m: usize,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    /// Physical wavenumbers of the doubled domain, one axis.
    pub(crate) k_m: Vec<f64>,
    /// Derivative symbol of the doubled domain (Nyquist zeroed).
    pub(crate) kd_m: Vec<f64>,
    keep_m: Vec<bool>,
    kd_n: Vec<f64>,
}

type SpectralMap = HashMap<(u64, usize), Arc<Spectral>>;

static CACHE: Lazy<Mutex<SpectralMap>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

pub(crate) fn spectral(grid: &GridSpec) -> Arc<Spectral> {
    let key = (grid.extent().to_bits(), grid.points());
    let mut cache = CACHE.lock().expect("spectral cache poisoned");
    cache
        .entry(key)
        .or_insert_with(|| Arc::new(Spectral::new(*grid)))
        .clone()
}

fn wavenumbers(len: usize, period: f64) -> (Vec<f64>, Vec<f64>) {
    let base = 2.0 * std::f64::consts::PI / period;
    let k: Vec<f64> = (0..len)
        .map(|a| {
            let s = if a <= len / 2 { a as f64 } else { a as f64 - len as f64 };
            s * base
        })
        .collect();
    let kd = k
        .iter()
        .enumerate()
        .map(|(a, &v)| if a == len / 2 { 0.0 } else { v })
        .collect();
    (k, kd)
}

fn transpose(src: &[C], dst: &mut [C], rows: usize, cols: usize) {
    const B: usize = 16;
    for ib in (0..rows).step_by(B) {
        for jb in (0..cols).step_by(B) {
            for i in ib..(ib + B).min(rows) {
                for j in jb..(jb + B).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

impl Spectral {
    fn new(grid: GridSpec) -> Self {
        let n = grid.points();
        let m = 2 * n;
        let h = grid.spacing();
        let mut planner = FftPlanner::new();
        let (k_m, kd_m) = wavenumbers(m, m as f64 * h);
        let (_, kd_n) = wavenumbers(n, n as f64 * h);
        let cutoff = (2.0 / 3.0) * std::f64::consts::PI / h;
        let keep_m = k_m.iter().map(|k| k.abs() <= cutoff * (1.0 + 1e-12)).collect();
        Spectral {
            n,
            m,
            fwd_m: planner.plan_fft_forward(m),
            inv_m: planner.plan_fft_inverse(m),
            fwd_n: planner.plan_fft_forward(n),
            inv_n: planner.plan_fft_inverse(n),
            k_m,
            kd_m,
            keep_m,
            kd_n,
        }
    }

    /// Transform `f + i g` zero-padded to the doubled domain.
    fn forward_packed(&self, f: &[f64], g: Option<&[f64]>) -> Vec<C> {
        let (n, m) = (self.n, self.m);
        let mut buf = vec![C::default(); n * m];
        for i in 0..n {
            let row = &mut buf[i * m..i * m + n];
            match g {
                Some(g) => {
                    for j in 0..n {
                        row[j] = C::new(f[i * n + j], g[i * n + j]);
                    }
                }
                None => {
                    for j in 0..n {
                        row[j] = C::new(f[i * n + j], 0.0);
                    }
                }
            }
        }
        self.fwd_m.process(&mut buf);
        // rows n..m of the padded array are zero; transpose only the filled part
        let mut t = vec![C::default(); m * n];
        transpose(&buf, &mut t, n, m);
        let mut out = vec![C::default(); m * m];
        for j in 0..m {
            out[j * m..j * m + n].copy_from_slice(&t[j * n..j * n + n]);
        }
        self.fwd_m.process(&mut out);
        out
    }

    /// Split a packed transform of `f + i g` into `(f̂, ĝ)`.
    fn unpack(&self, p: &[C]) -> (Vec<C>, Vec<C>) {
        let m = self.m;
        let mut f = vec![C::default(); m * m];
        let mut g = vec![C::default(); m * m];
        for b in 0..m {
            let nb = (m - b) % m;
            for a in 0..m {
                let na = (m - a) % m;
                let x = p[b * m + a];
                let y = p[nb * m + na].conj();
                f[b * m + a] = 0.5 * (x + y);
                g[b * m + a] = -0.5 * I * (x - y);
            }
        }
        (f, g)
    }

    /// Spectra of two real fields given on the full 2N×2N domain.
    pub(crate) fn forward_full2(&self, f: &[f64], g: &[f64]) -> (Vec<C>, Vec<C>) {
        let m = self.m;
        let mut buf: Vec<C> = f.iter().zip(g).map(|(&a, &b)| C::new(a, b)).collect();
        self.fwd_m.process(&mut buf);
        let mut t = vec![C::default(); m * m];
        transpose(&buf, &mut t, m, m);
        self.fwd_m.process(&mut t);
        self.unpack(&t)
    }

    /// Doubled-domain spectra of up to two real fields.
    pub(crate) fn forward2(&self, f: &[f64], g: &[f64]) -> (Vec<C>, Vec<C>) {
        let p = self.forward_packed(f, Some(g));
        self.unpack(&p)
    }

    pub(crate) fn forward1(&self, f: &[f64]) -> Vec<C> {
        self.forward_packed(f, None)
    }

    /// Inverse of `a + i b` cropped to the N-box; returns `(Re, Im)`.
    pub(crate) fn inverse_packed(&self, mut spec: Vec<C>) -> (Vec<f64>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        self.inv_m.process(&mut spec);
        // spec[b * m + i] now indexed by (k2 = b, x1 = i); keep x1 < n
        let mut t = vec![C::default(); n * m];
        for b in 0..m {
            for i in 0..n {
                t[i * m + b] = spec[b * m + i];
            }
        }
        self.inv_m.process(&mut t);
        let scale = 1.0 / (m * m) as f64;
        let mut re = vec![0.0; n * n];
        let mut im = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = t[i * m + j] * scale;
                re[i * n + j] = v.re;
                im[i * n + j] = v.im;
            }
        }
        (re, im)
    }

    pub(crate) fn inverse2(&self, a: &[C], b: &[C]) -> (Vec<f64>, Vec<f64>) {
        let spec = a.iter().zip(b).map(|(x, y)| x + I * y).collect();
        self.inverse_packed(spec)
    }

    pub(crate) fn inverse1(&self, a: Vec<C>) -> Vec<f64> {
        self.inverse_packed(a).0
    }

    /// Per-axis heat factors `exp(-k² t)`; the 2-D symbol is their outer product.
    pub(crate) fn heat_axis(&self, t: f64) -> Vec<f64> {
        self.k_m.iter().map(|k| (-k * k * t).exp()).collect()
    }

    pub(crate) fn apply_heat(&self, spec: &mut [C], t: f64) {
        if t == 0.0 {
            return;
        }
        let e = self.heat_axis(t);
        let m = self.m;
        for b in 0..m {
            for a in 0..m {
                spec[b * m + a] *= e[a] * e[b];
            }
        }
    }

    pub(crate) fn keep_axis(&self) -> &[bool] {
        &self.keep_m
    }

    /// `i k · (F̂₁, F̂₂)` on the doubled domain.
    pub(crate) fn divergence_spec(&self, f1: &[C], f2: &[C]) -> Vec<C> {
        let m = self.m;
        let mut out = vec![C::default(); m * m];
        for b in 0..m {
            let k2 = self.kd_m[b];
            for a in 0..m {
                let idx = b * m + a;
                out[idx] = I * (self.kd_m[a] * f1[idx] + k2 * f2[idx]);
            }
        }
        out
    }

    fn forward_n(&self, f: &[f64], g: Option<&[f64]>) -> Vec<C> {
        let n = self.n;
        let mut buf: Vec<C> = match g {
            Some(g) => f.iter().zip(g).map(|(&a, &b)| C::new(a, b)).collect(),
            None => f.iter().map(|&a| C::new(a, 0.0)).collect(),
        };
        self.fwd_n.process(&mut buf);
        let mut t = vec![C::default(); n * n];
        transpose(&buf, &mut t, n, n);
        self.fwd_n.process(&mut t);
        t
    }

    fn inverse_n(&self, spec: Vec<C>) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut s = spec;
        self.inv_n.process(&mut s);
        let mut t = vec![C::default(); n * n];
        transpose(&s, &mut t, n, n);
        self.inv_n.process(&mut t);
        let scale = 1.0 / (n * n) as f64;
        (
            t.iter().map(|v| v.re * scale).collect(),
            t.iter().map(|v| v.im * scale).collect(),
        )
    }

    pub(crate) fn gradient_raw(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let s = self.forward_n(f, None);
        let mut out = vec![C::default(); n * n];
        for b in 0..n {
            for a in 0..n {
                let idx = b * n + a;
                // ∂₁f + i ∂₂f, both real
                out[idx] = I * s[idx] * self.kd_n[a] - s[idx] * self.kd_n[b];
            }
        }
        self.inverse_n(out)
    }

    /// `(∂₁v₂ − ∂₂v₁, ∂₁v₁ + ∂₂v₂)` on the periodic N-grid.
    fn curl_div_raw(&self, v1: &[f64], v2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let p = self.forward_n(v1, Some(v2));
        let mut out = vec![C::default(); n * n];
        for b in 0..n {
            let nb = (n - b) % n;
            for a in 0..n {
                let na = (n - a) % n;
                let x = p[b * n + a];
                let y = p[nb * n + na].conj();
                let f1 = 0.5 * (x + y);
                let f2 = -0.5 * I * (x - y);
                let (k1, k2) = (self.kd_n[a], self.kd_n[b]);
                let curl = I * (k1 * f2 - k2 * f1);
                let div = I * (k1 * f1 + k2 * f2);
                out[b * n + a] = curl + I * div;
            }
        }
        self.inverse_n(out)
    }
}

/// Free-space heat evolution `e^{tΔ} f`, computed on the zero-padded doubled
/// domain so that periodic images do not reach the N-box.
pub fn heat_propagate(f: &ScalarField, t: f64) -> Result<ScalarField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::arg(format!("heat time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let sp = spectral(f.grid());
    let mut s = sp.forward1(f.values());
    sp.apply_heat(&mut s, t);
    Ok(ScalarField::from_raw(*f.grid(), sp.inverse1(s)))
}

/// Heat evolution of two fields with one packed transform pair.
pub fn heat_propagate_pair(
    f: &ScalarField,
    g: &ScalarField,
    t: f64,
) -> Result<(ScalarField, ScalarField)> {
    f.grid().check(g.grid())?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::arg(format!("heat time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok((f.clone(), g.clone()));
    }
    let sp = spectral(f.grid());
    let mut p = sp.forward_packed(f.values(), Some(g.values()));
    // the heat symbol is real and even, so it acts on the packed pair directly
    sp.apply_heat(&mut p, t);
    let (a, b) = sp.inverse_packed(p);
    Ok((
        ScalarField::from_raw(*f.grid(), a),
        ScalarField::from_raw(*f.grid(), b),
    ))
}

/// Spectral gradient on the periodic grid.
pub fn gradient(f: &ScalarField) -> VectorField {
    let sp = spectral(f.grid());
    let (gx, gy) = sp.gradient_raw(f.values());
    VectorField {
        x: ScalarField::from_raw(*f.grid(), gx),
        y: ScalarField::from_raw(*f.grid(), gy),
    }
}

/// `∂₁v₂ − ∂₂v₁`, spectrally on the periodic grid.
pub fn perp_div(v: &VectorField) -> Result<ScalarField> {
    v.x.grid().check(v.y.grid())?;
    let sp = spectral(v.grid());
    let (curl, _) = sp.curl_div_raw(v.x.values(), v.y.values());
    Ok(ScalarField::from_raw(*v.grid(), curl))
}

/// `∂₁v₁ + ∂₂v₂`, spectrally on the periodic grid.
pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    v.x.grid().check(v.y.grid())?;
    let sp = spectral(v.grid());
    let (_, div) = sp.curl_div_raw(v.x.values(), v.y.values());
    Ok(ScalarField::from_raw(*v.grid(), div))
}
