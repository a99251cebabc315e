use serde::{Deserialize, Serialize};

use crate::biot_savart::velocity;
use crate::condition_a::KatoIndices;
use crate::error::{Error, Result};
use crate::field::{lp_norm, lp_norm_vector, GridSpec, ScalarField, VectorField};
use crate::spectral::gradient;

/// Fields of one time node together with the derived `∇c` and `u = S∗ζ`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFields {
    pub n: ScalarField,
    pub c: ScalarField,
    pub zeta: ScalarField,
    pub grad_c: VectorField,
    pub u: VectorField,
}

impl NodeFields {
    pub fn new(n: ScalarField, c: ScalarField, zeta: ScalarField) -> Result<Self> {
        n.grid().check(c.grid())?;
        n.grid().check(zeta.grid())?;
        let grad_c = gradient(&c);
        let u = velocity(&zeta);
        Ok(NodeFields { n, c, zeta, grad_c, u })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        NodeFields {
            n: ScalarField::zeros(grid),
            c: ScalarField::zeros(grid),
            zeta: ScalarField::zeros(grid),
            grad_c: VectorField::zeros(grid),
            u: VectorField::zeros(grid),
        }
    }

    /// `a·self + b·other`, valid for every stored field since `∇` and `S∗` are linear.
    pub fn combine(&self, a: f64, other: &NodeFields, b: f64) -> NodeFields {
        let s = |x: &ScalarField, y: &ScalarField| x.combine(a, y, b).expect("same grid");
        let v = |x: &VectorField, y: &VectorField| x.combine(a, y, b).expect("same grid");
        NodeFields {
            n: s(&self.n, &other.n),
            c: s(&self.c, &other.c),
            zeta: s(&self.zeta, &other.zeta),
            grad_c: v(&self.grad_c, &other.grad_c),
            u: v(&self.u, &other.u),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.n.is_finite() && self.c.is_finite() && self.zeta.is_finite()
    }
}

/// Time nodes `0 < t₁ < … < t_M = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeMesh {
    pub times: Vec<f64>,
}

impl TimeMesh {
    /// Geometric mesh `t_k = T·r^{M−k}` with `t₁ = T·first_fraction`.
    pub fn geometric(horizon: f64, nodes: usize, first_fraction: f64) -> Result<Self> {
        if nodes < 8 {
            return Err(Error::arg(format!("time mesh needs at least 8 nodes, got {nodes}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::arg("time horizon must be positive"));
        }
        if !(first_fraction > 0.0 && first_fraction < 1.0) {
            return Err(Error::arg("first node fraction must lie in (0, 1)"));
        }
        let r = first_fraction.powf(1.0 / (nodes - 1) as f64);
        let mut times: Vec<f64> = (0..nodes).map(|k| horizon * r.powi((nodes - 1 - k) as i32)).collect();
        times[nodes - 1] = horizon;
        Ok(TimeMesh { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 8 {
            return Err(Error::arg(format!("time mesh needs at least 8 nodes, got {}", times.len())));
        }
        if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::arg("time nodes must be positive and strictly increasing"));
        }
        Ok(TimeMesh { times })
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty mesh")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The mesh scaled so its last node is `horizon`.
    pub fn rescaled(&self, horizon: f64) -> TimeMesh {
        let f = horizon / self.horizon();
        TimeMesh { times: self.times.iter().map(|t| t * f).collect() }
    }
}

/// Discrete trajectory on a time mesh, including the `t = 0` data.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    grid: GridSpec,
    times: Vec<f64>,
    initial: NodeFields,
    nodes: Vec<NodeFields>,
}

/// Component selector for Kato-weighted norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    N,
    C,
    GradC,
    Zeta,
}

/// The three Kato norms and their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct XNorms {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl XNorms {
    pub fn total(&self) -> f64 {
        self.x1 + self.x2 + self.x3
    }

    pub fn max(&self) -> f64 {
        self.x1.max(self.x2).max(self.x3)
    }
}

impl Trajectory {
    pub fn new(mesh: &TimeMesh, initial: NodeFields, nodes: Vec<NodeFields>) -> Result<Self> {
        if nodes.len() != mesh.len() {
            return Err(Error::arg(format!("{} node fields for {} time nodes", nodes.len(), mesh.len())));
        }
        let grid = *initial.n.grid();
        for f in &nodes {
            grid.check(f.n.grid())?;
        }
        Ok(Trajectory { grid, times: mesh.times.clone(), initial, nodes })
    }

    /// Trajectory from `(n, c, ζ)` triples, deriving `∇c` and `u`.
    pub fn from_fields(
        mesh: &TimeMesh,
        initial: (ScalarField, ScalarField, ScalarField),
        nodes: Vec<(ScalarField, ScalarField, ScalarField)>,
    ) -> Result<Self> {
        let init = NodeFields::new(initial.0, initial.1, initial.2)?;
        let nodes = nodes
            .into_iter()
            .map(|(n, c, z)| NodeFields::new(n, c, z))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mesh, init, nodes)
    }

    /// Same field at every node.
    pub fn constant(mesh: &TimeMesh, fields: NodeFields) -> Self {
        Trajectory {
            grid: *fields.n.grid(),
            times: mesh.times.clone(),
            nodes: vec![fields.clone(); mesh.len()],
            initial: fields,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mesh(&self) -> TimeMesh {
        TimeMesh { times: self.times.clone() }
    }

    pub fn initial(&self) -> &NodeFields {
        &self.initial
    }

    pub fn nodes(&self) -> &[NodeFields] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &NodeFields {
        &self.nodes[k]
    }

    pub fn last(&self) -> &NodeFields {
        self.nodes.last().expect("non-empty trajectory")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.initial.is_finite() && self.nodes.iter().all(NodeFields::is_finite)
    }

    /// Fields at time `s`: linear between `0` and `t₁`, linear in `log t`
    /// between later nodes, constant past `t_M`.
    pub fn interpolate(&self, s: f64) -> NodeFields {
        let t1 = self.times[0];
        if s <= 0.0 {
            return self.initial.clone();
        }
        if s < t1 {
            let th = s / t1;
            return self.initial.combine(1.0 - th, &self.nodes[0], th);
        }
        let k = self.times.partition_point(|&t| t <= s);
        if k >= self.times.len() {
            return self.last().clone();
        }
        // times[k-1] <= s < times[k]
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        let th = (s / ta).ln() / (tb / ta).ln();
        if th == 0.0 {
            return self.nodes[k - 1].clone();
        }
        self.nodes[k - 1].combine(1.0 - th, &self.nodes[k], th)
    }

    /// `a·self + b·other` node by node.
    pub fn combine(&self, a: f64, other: &Trajectory, b: f64) -> Result<Trajectory> {
        self.grid.check(&other.grid)?;
        if self.times != other.times {
            return Err(Error::arg("trajectories must share time nodes"));
        }
        Ok(Trajectory {
            grid: self.grid,
            times: self.times.clone(),
            initial: self.initial.combine(a, &other.initial, b),
            nodes: self.nodes.iter().zip(&other.nodes).map(|(x, y)| x.combine(a, y, b)).collect(),
        })
    }

    pub fn scale(&self, a: f64) -> Trajectory {
        let z = NodeFields::zeros(self.grid);
        Trajectory {
            grid: self.grid,
            times: self.times.clone(),
            initial: self.initial.combine(a, &z, 0.0),
            nodes: self.nodes.iter().map(|x| x.combine(a, &z, 0.0)).collect(),
        }
    }

    /// `sup_{t} t^α ‖component(t)‖_p` over the nodes; the `t = 0` data counts only when `α = 0`.
    pub fn kato_norm(&self, comp: Component, p: f64, alpha: f64) -> Result<f64> {
        let norm = |f: &NodeFields| -> Result<f64> {
            match comp {
                Component::N => lp_norm(&f.n, p),
                Component::C => lp_norm(&f.c, p),
                Component::GradC => lp_norm_vector(&f.grad_c, p),
                Component::Zeta => lp_norm(&f.zeta, p),
            }
        };
        let mut best = if alpha == 0.0 { norm(&self.initial)? } else { 0.0 };
        for (t, f) in self.times.iter().zip(&self.nodes) {
            best = best.max(t.powf(alpha) * norm(f)?);
        }
        Ok(best)
    }

    /// `(‖n‖_{X1}, ‖c‖_{X2}, ‖ζ‖_{X3})`.
    pub fn x_norms(&self, idx: &KatoIndices) -> Result<XNorms> {
        Ok(XNorms {
            x1: self.kato_norm(Component::N, idx.p1, idx.alpha1)?,
            x2: self.kato_norm(Component::C, f64::INFINITY, 0.0)?
                + self.kato_norm(Component::GradC, idx.p2, idx.alpha2)?,
            x3: self.kato_norm(Component::Zeta, idx.p3, idx.alpha3)?,
        })
    }

    /// Kato norms of `self − other`.
    pub fn x_distance(&self, other: &Trajectory, idx: &KatoIndices) -> Result<XNorms> {
        self.combine(1.0, other, -1.0)?.x_norms(idx)
    }
}
