//! Exponentially tailed losses and the smooth-margin functionals built on them.
//!
//! `S(u) = −log((1/n) Σ ℓ(−u_i))` and
//! `G_β(a) = −(1/β) log((1/n) Σ exp(−β z_iᵀa))`. Every reduction goes through a
//! max-shifted log-sum-exp so that large margins and large `β` stay finite.

use serde::{Deserialize, Serialize};

use crate::design::SignedFeatureMatrix;
use crate::error::{check_dim, Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    Exponential,
    Logistic,
}

const BRANCH: f64 = 30.0;

impl LossKind {
    /// `ℓ(u)`.
    pub fn value<T: Scalar>(self, u: T) -> T {
        match self {
            LossKind::Exponential => u.exp(),
            LossKind::Logistic => softplus(u),
        }
    }

    /// `ℓ'(u)`.
    pub fn derivative<T: Scalar>(self, u: T) -> T {
        match self {
            LossKind::Exponential => u.exp(),
            LossKind::Logistic => sigmoid(u),
        }
    }

    /// `log ℓ(u)`, accurate in the exponential tail.
    pub fn log_value<T: Scalar>(self, u: T) -> T {
        match self {
            LossKind::Exponential => u,
            LossKind::Logistic => {
                if u < -T::lit(BRANCH) {
                    // log log(1+e^u) = u + log(1 − e^u/2 + O(e^{2u}))
                    u + (-u.exp() * T::lit(0.5)).ln_1p()
                } else {
                    softplus(u).ln()
                }
            }
        }
    }

    /// `log ℓ'(u)`.
    pub fn log_derivative<T: Scalar>(self, u: T) -> T {
        match self {
            LossKind::Exponential => u,
            LossKind::Logistic => -softplus(-u),
        }
    }
}

fn softplus<T: Scalar>(u: T) -> T {
    if u > T::lit(BRANCH) {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        (T::one() + (-u).exp()).recip()
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

fn log_losses<T: Scalar>(loss: LossKind, u: &[T]) -> Vec<T> {
    u.iter().map(|&ui| loss.log_value(-ui)).collect()
}

/// `S(u) = −log((1/n) Σ_i ℓ(−u_i))`.
///
/// Panics on an empty margin vector.
pub fn smooth_margin<T: Scalar>(loss: LossKind, u: &[T]) -> T {
    assert!(!u.is_empty(), "smooth margin of an empty margin vector");
    let n = T::from_usize_lossy(u.len());
    n.ln() - log_sum_exp(&log_losses(loss, u))
}

/// `∇_i S(u) = ℓ'(−u_i) / Σ_{i'} ℓ(−u_{i'})`. The `1/n` inside the log
/// cancels, so this is the exact gradient of [`smooth_margin`].
pub fn smooth_margin_grad<T: Scalar>(loss: LossKind, u: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); u.len()];
    smooth_margin_grad_into(loss, u, &mut out);
    out
}

pub fn smooth_margin_grad_into<T: Scalar>(loss: LossKind, u: &[T], out: &mut [T]) {
    assert!(!u.is_empty(), "smooth margin of an empty margin vector");
    match loss {
        LossKind::Exponential => softmin_weights_into(u, T::one(), out),
        LossKind::Logistic => {
            let lse = log_sum_exp(&log_losses(loss, u));
            for (o, &ui) in out.iter_mut().zip(u) {
                *o = (loss.log_derivative(-ui) - lse).exp();
            }
        }
    }
}

/// `S_β(u) = −(1/β) log((1/n) Σ ℓ(−β u_i))`, a soft-min of `u`.
pub fn scaled_smooth_margin<T: Scalar>(loss: LossKind, u: &[T], beta: T) -> Result<T> {
    check_beta(beta)?;
    let scaled: Vec<T> = u.iter().map(|&v| v * beta).collect();
    Ok(smooth_margin(loss, &scaled) / beta)
}

/// `p_i ∝ exp(−β u_i)`, normalized to the simplex.
pub fn softmin_weights_into<T: Scalar>(u: &[T], beta: T, out: &mut [T]) {
    let min = u.iter().copied().fold(T::infinity(), T::min);
    let mut total = T::zero();
    for (o, &ui) in out.iter_mut().zip(u) {
        *o = (-(beta * (ui - min))).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be positive and finite, got {beta}")));
    }
    Ok(())
}

/// `G_β(a) = −(1/β) log((1/n) Σ_i exp(−β z_iᵀa))`.
pub fn g_beta<T: Scalar>(z: &SignedFeatureMatrix<T>, a: &[T], beta: T) -> Result<T> {
    check_beta(beta)?;
    check_dim(z.cols(), a.len())?;
    let za = z.mul(a);
    Ok(g_beta_from_margins(&za, beta))
}

/// `G_β` evaluated from precomputed margins `Za`.
pub fn g_beta_from_margins<T: Scalar>(za: &[T], beta: T) -> T {
    let n = T::from_usize_lossy(za.len());
    let min = za.iter().copied().fold(T::infinity(), T::min);
    let s: T = za.iter().map(|&v| (-(beta * (v - min))).exp()).sum();
    min - (s / n).ln() / beta
}

/// `∇G_β(a) = Zᵀp` with `p = softmin_β(Za) ∈ Δ^{n−1}`.
pub fn g_beta_grad<T: Scalar>(z: &SignedFeatureMatrix<T>, a: &[T], beta: T) -> Result<Vec<T>> {
    check_beta(beta)?;
    check_dim(z.cols(), a.len())?;
    let za = z.mul(a);
    let mut p = vec![T::zero(); z.rows()];
    softmin_weights_into(&za, beta, &mut p);
    Ok(z.tmul(&p))
}
