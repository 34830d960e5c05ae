//! Margin-based generalization bound
//! `P[y f(x) < 0] ≤ 4 Rad/γ + √(log log₂(4C/γ) / n) + √(log(1/δ) / (2n))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub gamma: f64,
    /// Bound on `sup |f(x)|` over the data domain, e.g. `R + 1`.
    pub sup_norm: f64,
    pub n: usize,
    pub delta: f64,
    /// Rademacher complexity of the unit ball; `None` means `1/√n`.
    pub rademacher: Option<f64>,
}

impl BoundInputs {
    pub fn new(gamma: f64, sup_norm: f64, n: usize, delta: f64) -> Self {
        Self {
            gamma,
            sup_norm,
            n,
            delta,
            rademacher: None,
        }
    }

    pub fn with_rademacher(mut self, rad: f64) -> Self {
        self.rademacher = Some(rad);
        self
    }

    pub fn rademacher_value(&self) -> f64 {
        self.rademacher.unwrap_or_else(|| (self.n as f64).sqrt().recip())
    }
}

/// `C = R + 1` for inputs in the ball of radius `R`.
pub fn sup_norm_from_radius(r: f64) -> f64 {
    r + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginBound {
    pub complexity_term: f64,
    pub margin_term: f64,
    pub confidence_term: f64,
    /// Sum of the three terms.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub value: f64,
}

pub fn margin_bound(b: &BoundInputs) -> Result<MarginBound> {
    let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
    if !(b.gamma > 0.0) || !b.gamma.is_finite() {
        return bad("margin must be positive");
    }
    if !(b.sup_norm > 0.0) || !b.sup_norm.is_finite() {
        return bad("sup-norm bound must be positive");
    }
    if b.n == 0 {
        return bad("sample size must be >= 1");
    }
    if !(b.delta > 0.0 && b.delta < 1.0) {
        return bad("confidence must lie in (0, 1)");
    }
    let rad = b.rademacher_value();
    if !(rad >= 0.0) || !rad.is_finite() {
        return bad("rademacher complexity must be nonnegative");
    }
    let ll = (4.0 * b.sup_norm / b.gamma).log2();
    if ll <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "log2(4C/gamma) = {ll} <= 1; the log-log term is undefined (need gamma < 2C)"
        )));
    }
    let n = b.n as f64;
    let complexity_term = 4.0 * rad / b.gamma;
    let margin_term = (ll.ln() / n).sqrt();
    let confidence_term = ((1.0 / b.delta).ln() / (2.0 * n)).sqrt();
    let raw = complexity_term + margin_term + confidence_term;
    Ok(MarginBound {
        complexity_term,
        margin_term,
        confidence_term,
        raw,
        value: raw.clamp(0.0, 1.0),
    })
}
