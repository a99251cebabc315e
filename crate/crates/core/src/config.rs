//! JSON run configuration shared by the command-line driver.
//!
//! ```json
//! {
//!   "grid": {"L": 8.0, "N": 128},
//!   "indices": [2.125, 3.0, 1.875, 0.5294117647058824, 0.16666666666666666, 0.4666666666666667],
//!   "horizon": 0.2,
//!   "nodes": 16,
//!   "first_fraction": 0.001,
//!   "solver": "both",
//!   "data": {
//!     "n0": {"atoms": [{"x": [0.0, 0.0], "w": 1.0}]},
//!     "zeta0": {"gaussians": [{"center": [0.3, 0.0], "sigma": 0.5, "mass": 0.1}]},
//!     "c0": {"gaussians": [{"center": [0.0, 0.0], "sigma": 0.6, "peak": 0.005}]},
//!     "phi": null
//!   },
//!   "picard": {"tol": 1e-6, "max_iter": 40, "max_halvings": 5, "c_master": null},
//!   "oracle": {"dt": 0.001, "checkpoint_every": null},
//!   "tolerances": {"mass": 1e-4, "min_n": 1e-6, "min_c": 1e-6, "c_sup": 1e-8, "compare": 1e-4, "scaling": 1e-3},
//!   "scale_lambda": 2.0,
//!   "seed": 0,
//!   "output": "out"
//! }
//! ```
//!
//! Every key except `grid`, `horizon` and `data` has the default shown.
//! Relative file paths resolve against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::condition_a::{validate, KatoIndices};
use crate::diagnostics::ConservationTolerances;
use crate::duhamel::TimeMesh;
use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::io::read_field;
use crate::measures::RadonMeasureSpec;
use crate::oracle::{CheckpointOptions, OracleOptions};
use crate::picard::PicardOptions;
use crate::problem::ProblemData;
use crate::spectral::gradient;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Picard,
    Oracle,
    #[default]
    Both,
}

/// Gaussian given by its peak value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakGaussian {
    pub center: [f64; 2],
    pub sigma: f64,
    pub peak: f64,
}

impl PeakGaussian {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let r2 = (x - self.center[0]).powi(2) + (y - self.center[1]).powi(2);
        self.peak * (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let s2 = self.sigma * self.sigma;
        let v = self.eval(x, y);
        [-(x - self.center[0]) / s2 * v, -(y - self.center[1]) / s2 * v]
    }
}

/// Sum of Gaussians plus an optional raw field dump.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub gaussians: Vec<PeakGaussian>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

/// Potential `φ`. A field file must declare `smooth: true`, asserting
/// `∇φ ∈ H²`; the gradient is then taken spectrally.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(default)]
    pub gaussians: Vec<PeakGaussian>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub smooth: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub n0: RadonMeasureSpec,
    #[serde(default)]
    pub zeta0: RadonMeasureSpec,
    #[serde(default)]
    pub c0: FieldSpec,
    #[serde(default)]
    pub phi: Option<PotentialSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub c_master: Option<f64>,
}

impl Default for PicardConfig {
    fn default() -> Self {
        let d = PicardOptions::default();
        PicardConfig { tol: d.tol, max_iter: d.max_iter, max_halvings: d.max_halvings, c_master: d.c_master }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub dt: f64,
    pub checkpoint_every: Option<usize>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { dt: 1e-3, checkpoint_every: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub mass: f64,
    pub min_n: f64,
    pub min_c: f64,
    pub c_sup: f64,
    /// Relative L² discrepancy between the two solvers.
    pub compare: f64,
    /// Relative L² discrepancy of the scaling check.
    pub scaling: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let c = ConservationTolerances::default();
        Tolerances { mass: c.mass, min_n: c.min_n, min_c: c.min_c, c_sup: c.c_sup, compare: 1e-4, scaling: 1e-3 }
    }
}

impl Tolerances {
    pub fn conservation(&self) -> ConservationTolerances {
        ConservationTolerances { mass: self.mass, min_n: self.min_n, min_c: self.min_c, c_sup: self.c_sup }
    }
}

fn default_indices() -> [f64; 6] {
    KatoIndices::reference().to_array()
}
fn default_nodes() -> usize {
    16
}
fn default_first_fraction() -> f64 {
    1e-3
}
fn default_lambda() -> f64 {
    2.0
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default = "default_indices")]
    pub indices: [f64; 6],
    pub horizon: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_first_fraction")]
    pub first_fraction: f64,
    #[serde(default)]
    pub solver: SolverChoice,
    pub data: DataConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_lambda")]
    pub scale_lambda: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

impl RunConfig {
    /// Parses and validates; schema errors carry the JSON path of the field.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(&path, e.into_inner().to_string())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    /// Serialized form with defaults filled in; hashed into run manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.extent, self.grid.points).map_err(|e| schema("grid", e.to_string()))
    }

    pub fn indices(&self) -> KatoIndices {
        KatoIndices::from_array(self.indices)
    }

    pub fn mesh(&self) -> Result<TimeMesh> {
        TimeMesh::geometric(self.horizon, self.nodes, self.first_fraction)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let v = validate(&self.indices())?;
        if !v.pass {
            let names: Vec<_> = v.failures().map(|c| c.name.clone()).collect();
            return Err(schema("indices", format!("fail Condition A: {}", names.join(", "))));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(schema("horizon", "must be positive"));
        }
        if self.nodes < 8 {
            return Err(schema("nodes", "at least 8 time nodes are needed"));
        }
        if !(self.first_fraction > 0.0 && self.first_fraction < 1.0) {
            return Err(schema("first_fraction", "must lie in (0, 1)"));
        }
        if !(self.oracle.dt > 0.0) {
            return Err(schema("oracle.dt", "must be positive"));
        }
        if !(self.picard.tol > 0.0) {
            return Err(schema("picard.tol", "must be positive"));
        }
        if !(self.scale_lambda > 0.0) {
            return Err(schema("scale_lambda", "must be positive"));
        }
        for (i, g) in self.data.c0.gaussians.iter().enumerate() {
            if !(g.sigma > 0.0) {
                return Err(schema(&format!("data.c0.gaussians[{i}].sigma"), "must be positive"));
            }
        }
        if let Some(phi) = &self.data.phi {
            if phi.file.is_some() && !phi.smooth {
                return Err(schema("data.phi.smooth", "a potential file must declare smooth: true (grad phi in H^2)"));
            }
            for (i, g) in phi.gaussians.iter().enumerate() {
                if !(g.sigma > 0.0) {
                    return Err(schema(&format!("data.phi.gaussians[{i}].sigma"), "must be positive"));
                }
            }
        }
        for (name, mu) in [("data.n0", &self.data.n0), ("data.zeta0", &self.data.zeta0)] {
            mu.check_support(&grid).map_err(|e| match e {
                Error::Schema { path, message } => schema(&format!("{name}.{path}"), message),
                other => other,
            })?;
        }
        Ok(())
    }

    fn sampled(&self, grid: &GridSpec, spec: &FieldSpec, name: &str) -> Result<ScalarField> {
        let mut f = ScalarField::from_fn(*grid, |x, y| spec.gaussians.iter().map(|g| g.eval(x, y)).sum());
        if let Some(p) = &spec.file {
            let (dump, _) = read_field(&self.resolve(p))?;
            grid.check(dump.grid()).map_err(|_| schema(&format!("{name}.file"), "grid differs from the config grid"))?;
            f = f.add(&dump)?;
        }
        Ok(f)
    }

    /// Loads density files and assembles `(n₀, c₀, ζ₀, ∇φ)`.
    pub fn problem(&self) -> Result<ProblemData> {
        let grid = self.grid()?;
        let mut n0 = self.data.n0.clone();
        let mut zeta0 = self.data.zeta0.clone();
        n0.load_density(Some(&self.base_dir))?;
        zeta0.load_density(Some(&self.base_dir))?;
        let c0 = self.sampled(&grid, &self.data.c0, "data.c0")?;
        let grad_phi = match &self.data.phi {
            None => None,
            Some(phi) => {
                let analytic = |k: usize| {
                    ScalarField::from_fn(grid, move |x, y| phi.gaussians.iter().map(|g| g.grad(x, y)[k]).sum())
                };
                let mut gp = VectorField::new(analytic(0), analytic(1))?;
                if let Some(p) = &phi.file {
                    let (dump, _) = read_field(&self.resolve(p))?;
                    grid.check(dump.grid()).map_err(|_| schema("data.phi.file", "grid differs from the config grid"))?;
                    gp = gp.combine(1.0, &gradient(&dump), 1.0)?;
                }
                Some(gp)
            }
        };
        Ok(ProblemData { n0, c0, zeta0, grad_phi })
    }

    pub fn picard_options(&self) -> PicardOptions {
        PicardOptions {
            tol: self.picard.tol,
            max_iter: self.picard.max_iter,
            max_halvings: self.picard.max_halvings,
            c_master: self.picard.c_master,
            ..PicardOptions::default()
        }
    }

    pub fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            dt: self.oracle.dt,
            checkpoint: self.oracle.checkpoint_every.map(|every| CheckpointOptions {
                dir: self.output_dir().join("checkpoints"),
                every,
            }),
        }
    }
}
