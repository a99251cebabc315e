//! Uniform-grid fields on the truncated plane `[-L/2, L/2)^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square grid of `points` samples per axis covering `[-L/2, L/2)^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "L")]
    extent: f64,
    #[serde(rename = "N")]
    points: usize,
}

impl GridSpec {
    pub fn new(extent: f64, points: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Grid(format!("extent L must be positive, got {extent}")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::Grid(format!(
                "N must be a power of two >= 16, got {points}"
            )));
        }
        Ok(GridSpec { extent, points })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points as f64
    }

    /// Physical coordinate of sample index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.extent + i as f64 * self.spacing()
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn len(&self) -> usize {
        self.points * self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same sample count on a box shrunk by `lambda`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        GridSpec::new(self.extent / lambda, self.points)
    }

    pub(crate) fn check(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real samples, row-major: `values[i * N + j]` sits at `(coord(i), coord(j))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.points();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            let x1 = grid.coord(i);
            for j in 0..n {
                values.push(f(x1, grid.coord(j)));
            }
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::arg(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite sample at flat index {k}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.points() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.grid.check(&other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.grid.check(&other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .collect(),
        })
    }

    /// Discrete integral `h^2 Σ f`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Integral of `|f|` outside the central quarter `[-L/4, L/4)^2`.
    pub fn leakage(&self) -> f64 {
        let n = self.grid.points();
        let (lo, hi) = (n / 4, 3 * n / 4);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i < lo || i >= hi || j < lo || j >= hi {
                    s += self.values[i * n + j].abs();
                }
            }
        }
        s * self.grid.cell_area()
    }
}

/// Two components on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.grid.check(&y.grid)?;
        Ok(VectorField { x, y })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        VectorField {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.x.grid()
    }

    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            grid: self.x.grid,
            values: self
                .x
                .values
                .iter()
                .zip(&self.y.values)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        VectorField {
            x: self.x.scale(a),
            y: self.y.scale(a),
        }
    }

    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> Result<Self> {
        Ok(VectorField {
            x: self.x.combine(a, &other.x, b)?,
            y: self.y.combine(a, &other.y, b)?,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().max_abs()
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::arg(format!("Lebesgue exponent must be >= 1, got {p}")));
    }
    Ok(())
}

fn lp_of(values: impl Iterator<Item = f64> + Clone, area: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    if p == 1.0 {
        return area * values.map(f64::abs).sum::<f64>();
    }
    if p == 2.0 {
        return (area * values.map(|v| v * v).sum::<f64>()).sqrt();
    }
    // scale by the max to keep |f|^p in range for large p
    let m = values.clone().fold(0.0_f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = values.map(|v| (v.abs() / m).powf(p)).sum();
    m * (area * s).powf(1.0 / p)
}

/// `(h^2 Σ |f|^p)^(1/p)`, or `max |f|` for `p = ∞`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_of(f.values.iter().copied(), f.grid.cell_area(), p))
}

/// Lᵖ norm of the pointwise Euclidean magnitude.
pub fn lp_norm_vector(v: &VectorField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let mag = v.magnitude();
    Ok(lp_of(mag.values.iter().copied(), mag.grid.cell_area(), p))
}
