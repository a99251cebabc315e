//! Initial data of a run and its discretization on a grid.

use crate::error::{Error, Result};
use crate::field::{lp_norm, lp_norm_vector, GridSpec, ScalarField, VectorField};
use crate::measures::{mollifier_level, mollify, RadonMeasureSpec};

/// `(n₀, c₀, ζ₀, ∇φ)` with measure-valued `n₀` and `ζ₀`.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub n0: RadonMeasureSpec,
    pub c0: ScalarField,
    pub zeta0: RadonMeasureSpec,
    pub grad_phi: Option<VectorField>,
}

/// Grid fields of the initial data after mollification at level `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialFields {
    pub n0: ScalarField,
    pub c0: ScalarField,
    pub zeta0: ScalarField,
    pub grad_phi: Option<VectorField>,
    pub level: usize,
}

impl ProblemData {
    pub fn grid(&self) -> &GridSpec {
        self.c0.grid()
    }

    /// Mollifies the measures at the finest resolvable level and checks signs.
    pub fn discretize(&self) -> Result<InitialFields> {
        let grid = *self.grid();
        if let Some(g) = &self.grad_phi {
            grid.check(g.grid())?;
        }
        let level = mollifier_level(&grid)?;
        let n0 = mollify(&self.n0, level, &grid).map_err(|e| prefix("n0", e))?;
        let zeta0 = mollify(&self.zeta0, level, &grid).map_err(|e| prefix("zeta0", e))?;
        let fields = InitialFields { n0, c0: self.c0.clone(), zeta0, grad_phi: self.grad_phi.clone(), level };
        fields.check_signs()?;
        Ok(fields)
    }
}

fn prefix(name: &str, e: Error) -> Error {
    match e {
        Error::Schema { path, message } => Error::Schema { path: format!("{name}.{path}"), message },
        other => other,
    }
}

impl InitialFields {
    pub fn new(n0: ScalarField, c0: ScalarField, zeta0: ScalarField, grad_phi: Option<VectorField>) -> Result<Self> {
        n0.grid().check(c0.grid())?;
        n0.grid().check(zeta0.grid())?;
        if let Some(g) = &grad_phi {
            n0.grid().check(g.grid())?;
        }
        let level = mollifier_level(n0.grid())?;
        Ok(InitialFields { n0, c0, zeta0, grad_phi, level })
    }

    pub fn grid(&self) -> &GridSpec {
        self.n0.grid()
    }

    /// `n₀, c₀ ≥ 0` up to `1e−12` of their sup.
    pub fn check_signs(&self) -> Result<()> {
        for (name, f) in [("n0", &self.n0), ("c0", &self.c0)] {
            let floor = -1e-12 * f.max_abs();
            if f.min() < floor {
                return Err(Error::Schema {
                    path: name.into(),
                    message: format!("data must be nonnegative (min {:.3e})", f.min()),
                });
            }
        }
        Ok(())
    }

    pub fn scale(&self, a: f64) -> InitialFields {
        InitialFields {
            n0: self.n0.scale(a),
            c0: self.c0.scale(a),
            zeta0: self.zeta0.scale(a),
            grad_phi: self.grad_phi.clone(),
            level: self.level,
        }
    }

    pub fn grad_phi_l2(&self) -> f64 {
        self.grad_phi.as_ref().map_or(0.0, |g| lp_norm_vector(g, 2.0).expect("p = 2"))
    }

    pub fn grad_phi_sup(&self) -> f64 {
        self.grad_phi.as_ref().map_or(0.0, |g| g.magnitude().max_abs())
    }

    pub fn c0_sup(&self) -> f64 {
        lp_norm(&self.c0, f64::INFINITY).expect("p = inf")
    }
}
