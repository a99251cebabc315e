//! Admissibility of Kato exponent sextuples and the constants of the
//! fixed-point argument.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

/// Slack below which derived (in)equalities are treated as boundary cases.
const EPS: f64 = 1e-12;

/// `(p₁, p₂, p₃, α₁, α₂, α₃)`: `n ∈ C_{α₁}(L^{p₁})`, `∇c ∈ C_{α₂}(L^{p₂})`,
/// `ζ ∈ C_{α₃}(L^{p₃})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatoIndices {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl KatoIndices {
    pub fn new(p1: f64, p2: f64, p3: f64, alpha1: f64, alpha2: f64, alpha3: f64) -> Self {
        KatoIndices { p1, p2, p3, alpha1, alpha2, alpha3 }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        KatoIndices::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.p1, self.p2, self.p3, self.alpha1, self.alpha2, self.alpha3]
    }

    /// The example sextuple `(17/8, 3, 15/8, 9/17, 1/6, 7/15)`.
    pub fn reference() -> Self {
        KatoIndices::new(17.0 / 8.0, 3.0, 15.0 / 8.0, 9.0 / 17.0, 1.0 / 6.0, 7.0 / 15.0)
    }

    /// The sextuple `(17/8, 17/8, 15/8, 9/17, 1/34, 7/15)`.
    pub fn reference_equal_p() -> Self {
        KatoIndices::new(17.0 / 8.0, 17.0 / 8.0, 15.0 / 8.0, 9.0 / 17.0, 1.0 / 34.0, 7.0 / 15.0)
    }

    /// Time weights fixed by the critical scaling relations for given exponents.
    pub fn critical(p1: f64, p2: f64, p3: f64) -> Self {
        KatoIndices::new(p1, p2, p3, 1.0 - 1.0 / p1, 0.5 - 1.0 / p2, 1.0 - 1.0 / p3)
    }
}

/// One sub-condition with its signed slack (positive means satisfied with room).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCondition {
    pub group: String,
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub indices: KatoIndices,
    pub checks: Vec<SubCondition>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &SubCondition> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn failed(&self, name: &str) -> bool {
        self.checks.iter().any(|c| c.name == name && !c.pass)
    }

    pub fn group_passes(&self, group: &str) -> bool {
        self.checks.iter().filter(|c| c.group == group).all(|c| c.pass)
    }

    /// Plain-text table, one sub-condition per line.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{:<6} {:<26} {:<4} margin {:+.6e}\n",
                c.group,
                c.name,
                if c.pass { "ok" } else { "FAIL" },
                c.margin
            ));
        }
        s.push_str(if self.pass { "Condition A: PASS\n" } else { "Condition A: FAIL\n" });
        s
    }
}

struct Checks(Vec<SubCondition>);

impl Checks {
    fn push(&mut self, group: &str, name: &str, pass: bool, margin: f64) {
        self.0.push(SubCondition {
            group: group.into(),
            name: name.into(),
            pass,
            margin,
        });
    }

    /// `lhs ≤ rhs` up to round-off.
    fn le(&mut self, group: &str, name: &str, lhs: f64, rhs: f64) {
        let m = rhs - lhs;
        self.push(group, name, m >= -EPS, m);
    }

    /// `lhs < rhs` with a margin exceeding round-off.
    fn lt(&mut self, group: &str, name: &str, lhs: f64, rhs: f64) {
        let m = rhs - lhs;
        self.push(group, name, m > EPS, m);
    }

    fn eq(&mut self, group: &str, name: &str, lhs: f64, rhs: f64) {
        let m = -(lhs - rhs).abs();
        self.push(group, name, m >= -EPS, m);
    }
}

/// Checks every sub-condition of Condition A.
pub fn validate(idx: &KatoIndices) -> Result<ValidationReport> {
    let a = idx.to_array();
    if a.iter().any(|v| v.is_nan() || (v.is_infinite() && *v < 0.0)) {
        return Err(Error::arg("indices must be finite or +inf"));
    }
    if a[3..].iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("time weights must be finite"));
    }
    let KatoIndices { p1, p2, p3, alpha1: a1, alpha2: a2, alpha3: a3 } = *idx;
    let (q1, q2, q3) = (1.0 / p1, 1.0 / p2, 1.0 / p3);
    let mut c = Checks(Vec::new());

    for (name, p) in [("p1 >= 1", p1), ("p2 >= 1", p2), ("p3 >= 1", p3)] {
        c.push("range", name, p >= 1.0, p - 1.0);
    }
    for (name, al) in [("alpha1 >= 0", a1), ("alpha2 >= 0", a2), ("alpha3 >= 0", a3)] {
        c.push("range", name, al >= 0.0, al);
    }

    c.eq("A1", "alpha1 + 1/p1 = 1", a1 + q1, 1.0);
    c.eq("A1", "alpha2 + 1/p2 = 1/2", a2 + q2, 0.5);
    c.eq("A1", "alpha3 + 1/p3 = 1", a3 + q3, 1.0);

    c.le("A2", "1/p1 + 1/p2 <= 1", q1 + q2, 1.0);
    c.push("A2", "p2 > 2", p2 > 2.0, p2 - 2.0);
    c.push("A2", "p3 >= 4/3", p3 >= 4.0 / 3.0, p3 - 4.0 / 3.0);
    c.push("A2", "p3 < 2", p3 < 2.0, 2.0 - p3);
    c.le("A2", "1/p1 + 1/p3 <= 3/2", q1 + q3, 1.5);

    c.lt("A3", "1/p2 + 1/p3 < 3/2", q2 + q3, 1.5);
    c.push("A3", "p1 >= 2", p1 >= 2.0, p1 - 2.0);
    c.le("A3", "1/p1 - 1/p2 >= 0", 0.0, q1 - q2);
    c.lt("A3", "1/p1 - 1/p2 < 1/2", q1 - q2, 0.5);
    c.lt("A3", "1/p3 - 1/p1 > 0", 0.0, q3 - q1);
    c.le("A3", "1/p3 - 1/p1 <= 1/2", q3 - q1, 0.5);

    c.lt("A4", "alpha1 + alpha2 < 1", a1 + a2, 1.0);
    c.lt("A4", "alpha1 + alpha3 < 1", a1 + a3, 1.0);
    c.lt("A4", "alpha2 + alpha3 < 1", a2 + a3, 1.0);
    c.push("A4", "alpha3 < 1/2", a3 < 0.5, 0.5 - a3);

    let pass = c.0.iter().all(|s| s.pass);
    Ok(ValidationReport { indices: *idx, checks: c.0, pass })
}

/// `B(a, b) = Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::arg(format!("beta_fn needs positive finite arguments, got ({a}, {b})")));
    }
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if lo + hi < 140.0 {
        Ok(gamma(lo) * gamma(hi) / gamma(lo + hi))
    } else {
        Ok((ln_gamma(lo) + ln_gamma(hi) - ln_gamma(lo + hi)).exp())
    }
}

/// `B(a, b)` extended by `+∞` at and beyond the pole `b ≤ 0` (or `a ≤ 0`).
fn beta_or_inf(a: f64, b: f64) -> f64 {
    beta_fn(a, b).unwrap_or(f64::INFINITY)
}

/// Beta factors of each constant (the constant divided by `c_master`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaFactors {
    pub b112: f64,
    pub b113: f64,
    pub b223: f64,
    pub b212: f64,
    pub b333: f64,
    /// Factor of `α_lin / (c_master ‖∇φ‖₂)`.
    pub l13: f64,
}

impl BetaFactors {
    pub fn of(idx: &KatoIndices) -> Self {
        let KatoIndices { p1, p2, p3, alpha1: a1, alpha2: a2, alpha3: a3 } = *idx;
        let (q1, q2, q3) = (1.0 / p1, 1.0 / p2, 1.0 / p3);
        BetaFactors {
            b112: beta_or_inf(0.5 - q2, 1.0 - a1 - a2),
            b113: beta_or_inf(1.0 - q3, 1.0 - a1 - a3),
            b223: beta_or_inf(1.5 - q2 - q3, 1.0 - a2 - a3) + beta_or_inf(1.0 - q3, 1.0 - a2 - a3),
            b212: beta_or_inf(1.0 - q1, 1.0 - a1) + beta_or_inf(0.5 - q1 + q2, 1.0 - a1),
            b333: beta_or_inf(1.0 - q3, 1.0 - 2.0 * a3),
            l13: beta_or_inf(q3 - q1, 1.0 - a1),
        }
    }
}

/// Constants of the contraction argument for `x = y + B(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionBudget {
    pub c_master: f64,
    pub grad_phi_l2: f64,
    pub c112: f64,
    pub c113: f64,
    pub c223: f64,
    pub c212: f64,
    pub c333: f64,
    pub alpha_lin: f64,
    pub k1: f64,
    pub k2: f64,
    pub eps_max: f64,
    /// Names of constants at or near a Beta-function pole.
    pub divergent: Vec<String>,
}

impl ContractionBudget {
    pub fn ball_radius(&self, eps: f64) -> f64 {
        2.0 * self.k1 * eps
    }

    /// Accepts `ε` only strictly below `1/(4K₁K₂)`.
    pub fn accept_epsilon(&self, eps: f64) -> Result<f64> {
        if eps > 0.0 && eps < self.eps_max {
            Ok(eps)
        } else {
            Err(Error::arg(format!(
                "epsilon {eps} must lie in (0, {}) = (0, 1/(4 K1 K2))",
                self.eps_max
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.divergent.is_empty()
    }
}

/// Smallness threshold for `‖c₀‖_∞`: `min{1/(24p), 1/96}`.
pub fn c0_threshold(p: f64) -> f64 {
    (1.0 / (24.0 * p)).min(1.0 / 96.0)
}

/// Assembles all constants from the Beta factors; requires validated indices.
pub fn contraction_budget(
    idx: &KatoIndices,
    grad_phi_l2: f64,
    c_master: f64,
) -> Result<ContractionBudget> {
    let report = validate(idx)?;
    if !report.pass {
        let names: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
        return Err(Error::Inadmissible(names.join(", ")));
    }
    contraction_budget_unchecked(idx, grad_phi_l2, c_master)
}

/// Same assembly without the admissibility gate, for exploring pole behaviour.
pub fn contraction_budget_unchecked(
    idx: &KatoIndices,
    grad_phi_l2: f64,
    c_master: f64,
) -> Result<ContractionBudget> {
    if !(grad_phi_l2 >= 0.0 && grad_phi_l2.is_finite()) {
        return Err(Error::arg("grad_phi_l2 must be finite and >= 0"));
    }
    if !(c_master > 0.0 && c_master.is_finite()) {
        return Err(Error::arg("c_master must be finite and > 0"));
    }
    let f = BetaFactors::of(idx);
    let c = c_master;
    let (c112, c113, c223, c212, c333) = (c * f.b112, c * f.b113, c * f.b223, c * f.b212, c * f.b333);
    let alpha_lin = if grad_phi_l2 == 0.0 { 0.0 } else { c * grad_phi_l2 * f.l13 };
    let k1 = 1.0 + alpha_lin;
    let sum1 = c112 + c113;
    let k2 = alpha_lin * sum1 + c112 + c113 + c223 + c212 + c333;
    let eps_max = 1.0 / (4.0 * k1 * k2);
    let divergent = [
        ("C112", c112),
        ("C113", c113),
        ("C223", c223),
        ("C212", c212),
        ("C333", c333),
        ("alpha_lin", alpha_lin),
    ]
    .iter()
    .filter(|(_, v)| !v.is_finite() || *v > 1e12)
    .map(|(n, _)| n.to_string())
    .collect();
    Ok(ContractionBudget {
        c_master,
        grad_phi_l2,
        c112,
        c113,
        c223,
        c212,
        c333,
        alpha_lin,
        k1,
        k2,
        eps_max,
        divergent,
    })
}

/// Critical sextuples on a `steps³` grid of `(1/p₁, 1/p₂, 1/p₃) ∈ (0,1)³` that pass.
pub fn sweep(steps: usize) -> Vec<KatoIndices> {
    let mut out = Vec::new();
    let at = |k: usize| (k as f64 + 0.5) / steps as f64;
    for i in 0..steps {
        for j in 0..steps {
            for k in 0..steps {
                let idx = KatoIndices::critical(1.0 / at(i), 1.0 / at(j), 1.0 / at(k));
                if validate(&idx).map(|r| r.pass).unwrap_or(false) {
                    out.push(idx);
                }
            }
        }
    }
    out
}
