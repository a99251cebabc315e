//! Velocity from vorticity, `u = S∗ζ` with `S(x) = (2π)⁻¹|x|⁻²(−x₂, x₁)`,
//! by doubled-domain (Hockney) convolution.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C;
use once_cell::sync::Lazy;

use crate::error::Result;
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::spectral::{spectral, Spectral};

const I: C = C { re: 0.0, im: 1.0 };

/// Doubled-domain multipliers `h² FFT(S)` for both kernel components.
pub struct BiotSavartKernelCache {
    grid: GridSpec,
    s1: Vec<C>,
    s2: Vec<C>,
}

type KernelMap = HashMap<(u64, usize), Arc<BiotSavartKernelCache>>;

static KERNELS: Lazy<Mutex<KernelMap>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

impl BiotSavartKernelCache {
    /// Shared cache entry for `grid`.
    pub fn for_grid(grid: &GridSpec) -> Arc<Self> {
        let key = (grid.extent().to_bits(), grid.points());
        let mut map = KERNELS.lock().expect("kernel cache poisoned");
        map.entry(key).or_insert_with(|| Arc::new(Self::build(*grid))).clone()
    }

    fn build(grid: GridSpec) -> Self {
        let sp = spectral(&grid);
        let (n, m) = (sp.n, sp.m);
        let h = grid.spacing();
        let offset = |a: usize| if a < n { a as i64 } else { a as i64 - m as i64 };
        let mut k1 = vec![0.0; m * m];
        let mut k2 = vec![0.0; m * m];
        for a in 0..m {
            let d1 = offset(a);
            for b in 0..m {
                let d2 = offset(b);
                // origin: cell-average convention; seam row/column −N: keep exact oddness
                if (d1 == 0 && d2 == 0) || d1 == -(n as i64) || d2 == -(n as i64) {
                    continue;
                }
                let (x, y) = (d1 as f64 * h, d2 as f64 * h);
                let r2 = x * x + y * y;
                k1[a * m + b] = -y / (2.0 * PI * r2);
                k2[a * m + b] = x / (2.0 * PI * r2);
            }
        }
        let (mut s1, mut s2) = sp.forward_full2(&k1, &k2);
        let area = h * h;
        for b in 0..m {
            let kb = sp.kd_m[b];
            for a in 0..m {
                let idx = b * m + a;
                let ka = sp.kd_m[a];
                let (mut u, mut v) = (s1[idx] * area, s2[idx] * area);
                let k2n = ka * ka + kb * kb;
                if k2n > 0.0 {
                    let dot = (ka * u + kb * v) / k2n;
                    u -= ka * dot;
                    v -= kb * dot;
                }
                s1[idx] = u;
                s2[idx] = v;
            }
        }
        BiotSavartKernelCache { grid, s1, s2 }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `(û₁ + i û₂)` packed for one inverse transform, from `ζ̂`.
    pub(crate) fn packed_velocity_spec(&self, zeta_hat: &[C]) -> Vec<C> {
        zeta_hat
            .iter()
            .zip(self.s1.iter().zip(&self.s2))
            .map(|(z, (a, b))| z * a + I * (z * b))
            .collect()
    }

    pub(crate) fn velocity_raw(&self, sp: &Spectral, zeta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let zh = sp.forward1(zeta);
        sp.inverse_packed(self.packed_velocity_spec(&zh))
    }
}

/// `S∗ζ` on the grid of the cache.
pub fn velocity_from_vorticity(zeta: &ScalarField, cache: &BiotSavartKernelCache) -> Result<VectorField> {
    cache.grid.check(zeta.grid())?;
    let sp = spectral(zeta.grid());
    let (u1, u2) = cache.velocity_raw(&sp, zeta.values());
    Ok(VectorField {
        x: ScalarField::from_raw(*zeta.grid(), u1),
        y: ScalarField::from_raw(*zeta.grid(), u2),
    })
}

/// `S∗ζ` using the shared kernel cache of the field's grid.
pub fn velocity(zeta: &ScalarField) -> VectorField {
    let cache = BiotSavartKernelCache::for_grid(zeta.grid());
    velocity_from_vorticity(zeta, &cache).expect("cache built for this grid")
}

/// `∇·(S∗ζ)` with the doubled-domain spectral derivative used by the solvers.
pub fn velocity_divergence(zeta: &ScalarField) -> ScalarField {
    let sp = spectral(zeta.grid());
    let cache = BiotSavartKernelCache::for_grid(zeta.grid());
    let zh = sp.forward1(zeta.values());
    let u1: Vec<C> = zh.iter().zip(&cache.s1).map(|(z, s)| z * s).collect();
    let u2: Vec<C> = zh.iter().zip(&cache.s2).map(|(z, s)| z * s).collect();
    let div = sp.divergence_spec(&u1, &u2);
    ScalarField::from_raw(*zeta.grid(), sp.inverse1(div))
}
