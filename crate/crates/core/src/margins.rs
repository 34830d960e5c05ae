//! Discrete max-margin problems and their optimality certificates.
//!
//! * `γ₁⁽ᵐ⁾ = max_{a∈Δ^{m−1}} min_i z_iᵀa`, a matrix game solved exactly as a
//!   linear program.
//! * `γ₂⁽ᵐ⁾ = max_{√m‖a‖₂≤1} min_i z_iᵀa = min_{p∈Δ^{n−1}} ‖Zᵀp‖₂/√m`, solved
//!   through the dual by accelerated projected gradient followed by an
//!   active-set polish.
//!
//! Both return a [`MarginCertificate`] holding a primal/dual pair whose gap
//! certifies optimality.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::json;

use crate::datagen::LabeledDataset;
use crate::design::{build_direction_features, SignedFeatureMatrix};
use crate::error::{Error, Result};
use crate::features::{ActivationKind, FeatureModel, SphereMeasure};
use crate::scalar::{norm2, Scalar};

/// Gap tolerance of the linear program, relative to `max(1, ‖z‖_∞)`.
pub const LP_GAP_TOL: f64 = 1e-9;
/// Gap tolerance of the `γ₂` dual solver, relative to `max(1, ‖z‖_∞)`.
pub const DUAL_GAP_TOL: f64 = 1e-8;
/// Threshold for the argmin/argmax sets in support residuals.
pub const SUPPORT_TOL: f64 = 1e-6;

/// `min_i u_i`.
pub fn margin<T: Scalar>(u: &[T]) -> T {
    assert!(!u.is_empty(), "margin of an empty vector");
    u.iter().copied().fold(T::infinity(), T::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificateKind {
    /// Primal on the simplex `Δ^{m−1}` (variation-norm ball).
    Simplex,
    /// Primal on the ball `√m‖a‖₂ ≤ 1` (random-feature RKHS ball).
    Ball,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginCertificate<T> {
    pub kind: CertificateKind,
    pub primal: Vec<T>,
    /// `p ∈ Δ^{n−1}`.
    pub dual: Vec<T>,
    pub primal_value: T,
    pub dual_value: T,
    /// `dual_value − primal_value`.
    pub gap: T,
    /// Primal mass away from the maximizers of the dual-weighted score.
    pub support_residual_primal: T,
    /// Dual mass away from the minimal margins of the primal.
    pub support_residual_dual: T,
    pub separable: bool,
}

impl<T: Scalar> MarginCertificate<T> {
    pub fn value(&self) -> T {
        self.primal_value
    }

    pub fn to_f64(&self) -> MarginCertificate<f64> {
        let v = |x: &[T]| x.iter().map(|t| t.as_f64()).collect();
        MarginCertificate {
            kind: self.kind,
            primal: v(&self.primal),
            dual: v(&self.dual),
            primal_value: self.primal_value.as_f64(),
            dual_value: self.dual_value.as_f64(),
            gap: self.gap.as_f64(),
            support_residual_primal: self.support_residual_primal.as_f64(),
            support_residual_dual: self.support_residual_dual.as_f64(),
            separable: self.separable,
        }
    }

    /// `{value, dual_value, gap, primal[], dual[], residuals{}, separable}`.
    pub fn to_json(&self) -> serde_json::Value {
        let c = self.to_f64();
        json!({
            "kind": c.kind,
            "value": c.primal_value,
            "dual_value": c.dual_value,
            "gap": c.gap,
            "primal": c.primal,
            "dual": c.dual,
            "residuals": {
                "support_primal": c.support_residual_primal,
                "support_dual": c.support_residual_dual,
            },
            "separable": c.separable,
        })
    }
}

fn assemble<T: Scalar>(
    z: &SignedFeatureMatrix<T>,
    kind: CertificateKind,
    primal: Vec<T>,
    dual: Vec<T>,
    tol: T,
) -> MarginCertificate<T> {
    let za = z.mul(&primal);
    let ztp = z.tmul(&dual);
    let primal_value = margin(&za);
    let sqrt_m = T::from_usize_lossy(z.cols()).sqrt();
    let dual_value = match kind {
        CertificateKind::Simplex => ztp.iter().copied().fold(T::neg_infinity(), T::max),
        CertificateKind::Ball => norm2(&ztp) / sqrt_m,
    };
    let support_residual_primal = primal_support_residual(kind, &primal, &ztp, sqrt_m, tol);
    let support_residual_dual = dual
        .iter()
        .zip(&za)
        .filter(|(_, &m)| m > primal_value + tol)
        .map(|(&p, _)| p.abs())
        .sum();
    MarginCertificate {
        kind,
        primal,
        dual,
        primal_value,
        dual_value,
        gap: dual_value - primal_value,
        support_residual_primal,
        support_residual_dual,
        separable: primal_value > T::zero(),
    }
}

fn primal_support_residual<T: Scalar>(
    kind: CertificateKind,
    primal: &[T],
    ztp: &[T],
    sqrt_m: T,
    tol: T,
) -> T {
    match kind {
        CertificateKind::Simplex => {
            let best = ztp.iter().copied().fold(T::neg_infinity(), T::max);
            primal
                .iter()
                .zip(ztp)
                .filter(|(_, &s)| s < best - tol)
                .map(|(&a, _)| a.abs())
                .sum()
        }
        CertificateKind::Ball => {
            // the linear score over the ball is maximized only at Zᵀp/(√m‖Zᵀp‖)
            let nq = norm2(ztp);
            if nq == T::zero() {
                sqrt_m * norm2(primal)
            } else {
                primal
                    .iter()
                    .zip(ztp)
                    .map(|(&a, &q)| {
                        let d = sqrt_m * a - q / nq;
                        d * d
                    })
                    .sum::<T>()
                    .sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyReport {
    pub pass: bool,
    pub gap: f64,
    pub weak_duality: bool,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
    pub support_residual_primal: f64,
    pub support_residual_dual: f64,
}

/// Recomputes a certificate from scratch and checks the saddle-point
/// conditions within `tol`.
pub fn certify<T: Scalar>(
    z: &SignedFeatureMatrix<T>,
    cert: &MarginCertificate<T>,
    tol: f64,
) -> Result<CertifyReport> {
    if cert.primal.len() != z.cols() || cert.dual.len() != z.rows() {
        return Err(Error::DimensionMismatch {
            expected: z.rows() + z.cols(),
            got: cert.primal.len() + cert.dual.len(),
        });
    }
    let fresh = assemble(z, cert.kind, cert.primal.clone(), cert.dual.clone(), T::lit(tol));
    let simplex_residual = |v: &[T]| {
        let neg: f64 = v.iter().map(|x| (-x.as_f64()).max(0.0)).sum();
        let sum: f64 = v.iter().map(|x| x.as_f64()).sum();
        neg + (sum - 1.0).abs()
    };
    let primal_feasibility = match cert.kind {
        CertificateKind::Simplex => simplex_residual(&cert.primal),
        CertificateKind::Ball => {
            let m = z.cols() as f64;
            (m.sqrt() * norm2(&cert.primal).as_f64() - 1.0).max(0.0)
        }
    };
    let dual_feasibility = simplex_residual(&cert.dual);
    let gap = fresh.gap.as_f64();
    let report = CertifyReport {
        pass: false,
        gap,
        weak_duality: gap >= -tol,
        primal_feasibility,
        dual_feasibility,
        support_residual_primal: fresh.support_residual_primal.as_f64(),
        support_residual_dual: fresh.support_residual_dual.as_f64(),
    };
    let pass = report.weak_duality
        && gap <= tol
        && primal_feasibility <= tol
        && dual_feasibility <= tol
        && report.support_residual_primal <= tol
        && report.support_residual_dual <= tol;
    Ok(CertifyReport { pass, ..report })
}

fn uniform<T: Scalar>(k: usize) -> Vec<T> {
    vec![T::from_usize_lossy(k).recip(); k]
}

/// Exact `γ₁⁽ᵐ⁾` by the simplex method.
///
/// With `Z' = Z/‖z‖_∞ + 2 > 0` the game value `v' = v/‖z‖_∞ + 2` is positive
/// and `y = p/v'` solves `max 1ᵀy s.t. Z'ᵀy ≤ 1, y ≥ 0`, whose slack basis
/// is feasible. The primal simplex weights are read off the reduced costs of
/// the slacks. Entering and leaving variables follow Bland's rule.
pub fn gamma1_lp<T: Scalar>(z: &SignedFeatureMatrix<T>) -> Result<MarginCertificate<T>> {
    let (n, m) = (z.rows(), z.cols());
    let scale = z.inf_norm();
    let support_tol = T::lit(SUPPORT_TOL) * scale.max(T::one());
    if scale == T::zero() {
        return Ok(assemble(z, CertificateKind::Simplex, uniform(m), uniform(n), support_tol));
    }
    let gap_tol = T::lit(LP_GAP_TOL).max(T::epsilon() * T::lit(1e3)) * scale.max(T::one());

    let shift = T::lit(2.0);
    let mut tab = vec![T::zero(); m * n];
    for i in 0..n {
        for j in 0..m {
            tab[j * n + i] = z.get(i, j) / scale + shift;
        }
    }
    let mut rhs = vec![T::one(); m];
    let mut cost = vec![T::one(); n];
    let mut basic: Vec<usize> = (n..n + m).collect();
    let mut nonbasic: Vec<usize> = (0..n).collect();
    let eps = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let cap = 200 * (n + m) + 10_000;

    let mut optimal = false;
    for _ in 0..cap {
        let entering = (0..n)
            .filter(|&k| cost[k] > eps)
            .min_by_key(|&k| nonbasic[k]);
        let Some(s) = entering else {
            optimal = true;
            break;
        };
        let mut leave: Option<(usize, T)> = None;
        for r in 0..m {
            let a = tab[r * n + s];
            if a <= eps {
                continue;
            }
            let ratio = rhs[r] / a;
            leave = match leave {
                None => Some((r, ratio)),
                Some((cur, best)) => {
                    let slack = eps * best.abs().max(T::one());
                    if ratio < best - slack || (ratio <= best + slack && basic[r] < basic[cur]) {
                        Some((r, ratio))
                    } else {
                        Some((cur, best))
                    }
                }
            };
        }
        // Z' > 0 keeps the feasible region bounded
        let (r, _) = leave.expect("bounded linear program");
        pivot(&mut tab, &mut rhs, &mut cost, n, m, r, s);
        std::mem::swap(&mut basic[r], &mut nonbasic[s]);
    }

    let mut y = vec![T::zero(); n];
    for (r, &label) in basic.iter().enumerate() {
        if label < n {
            y[label] = rhs[r].max(T::zero());
        }
    }
    let mut x = vec![T::zero(); m];
    for (k, &label) in nonbasic.iter().enumerate() {
        if label >= n {
            x[label - n] = (-cost[k]).max(T::zero());
        }
    }
    let a = normalize_simplex(x);
    let p = normalize_simplex(y);
    let cert = assemble(z, CertificateKind::Simplex, a, p, support_tol);
    if !optimal || cert.gap > gap_tol {
        return Err(Error::NotConverged {
            gap: cert.gap.as_f64(),
            tol: gap_tol.as_f64(),
            best: Box::new(cert.to_f64()),
        });
    }
    Ok(cert)
}

fn pivot<T: Scalar>(
    tab: &mut [T],
    rhs: &mut [T],
    cost: &mut [T],
    n: usize,
    m: usize,
    r: usize,
    s: usize,
) {
    let piv = tab[r * n + s];
    let inv = piv.recip();
    for k in 0..n {
        if k != s {
            tab[r * n + k] *= inv;
        }
    }
    rhs[r] *= inv;
    tab[r * n + s] = inv;
    let (head, rest) = tab.split_at_mut(r * n);
    let (prow, tail) = rest.split_at_mut(n);
    let pr_rhs = rhs[r];
    let update = |row: &mut [T], rhs_i: &mut T| {
        let f = row[s];
        if f == T::zero() {
            return;
        }
        for k in 0..n {
            if k != s {
                row[k] -= f * prow[k];
            }
        }
        *rhs_i -= f * pr_rhs;
        row[s] = -f * inv;
    };
    for (i, row) in head.chunks_exact_mut(n).enumerate() {
        update(row, &mut rhs[i]);
    }
    for (i, row) in tail.chunks_exact_mut(n).enumerate() {
        update(row, &mut rhs[r + 1 + i]);
    }
    debug_assert_eq!(head.len() / n + 1 + tail.len() / n, m);
    let f = cost[s];
    for k in 0..n {
        if k != s {
            cost[k] -= f * prow[k];
        }
    }
    cost[s] = -f * inv;
}

fn normalize_simplex<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    let total: T = v.iter().copied().sum();
    if total > T::zero() {
        v.iter_mut().for_each(|x| *x /= total);
        v
    } else {
        uniform(v.len())
    }
}

/// Euclidean projection onto the simplex (sort-based).
pub fn project_simplex<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - T::one()) / T::from_usize_lossy(k + 1);
        if u - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// Largest eigenvalue of `Z Zᵀ` by 50 power iterations.
fn gram_spectral_norm<T: Scalar>(z: &SignedFeatureMatrix<T>) -> T {
    let n = z.rows();
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::from_usize_lossy(i % 7) * T::lit(0.1))
        .collect();
    let mut q = vec![T::zero(); z.cols()];
    let mut w = vec![T::zero(); n];
    let mut lambda = T::zero();
    for _ in 0..50 {
        let nv = norm2(&v);
        if nv == T::zero() {
            return T::zero();
        }
        v.iter_mut().for_each(|x| *x /= nv);
        z.tmul_into(&v, &mut q);
        z.mul_into(&q, &mut w);
        let next = norm2(&w);
        let done = (next - lambda).abs() <= T::lit(1e-10) * next;
        lambda = next;
        std::mem::swap(&mut v, &mut w);
        if done {
            break;
        }
    }
    lambda
}

/// Dual certificate for `γ₂` from a simplex point `p` of the scaled matrix.
fn ball_certificate<T: Scalar>(
    z: &SignedFeatureMatrix<T>,
    p: &[T],
    zero_tol: T,
    support_tol: T,
) -> MarginCertificate<T> {
    let m = z.cols();
    let q = z.tmul(p);
    let nq = norm2(&q);
    let sqrt_m = T::from_usize_lossy(m).sqrt();
    let primal = if nq / sqrt_m <= zero_tol {
        vec![T::zero(); m]
    } else {
        q.iter().map(|&v| v / (sqrt_m * nq)).collect()
    };
    assemble(z, CertificateKind::Ball, primal, p.to_vec(), support_tol)
}

/// `γ₂⁽ᵐ⁾` through `min_{p∈Δ} ‖Zᵀp‖₂/√m`.
///
/// Non-separable data gives value 0 with `separable = false`: then `p`
/// nearly cancels all feature columns and the primal is `a = 0`.
pub fn gamma2_dual<T: Scalar>(z: &SignedFeatureMatrix<T>) -> Result<MarginCertificate<T>> {
    let (n, m) = (z.rows(), z.cols());
    let scale = z.inf_norm();
    let unit = scale.max(T::one());
    let support_tol = T::lit(SUPPORT_TOL) * unit;
    if scale == T::zero() {
        return Ok(assemble(z, CertificateKind::Ball, vec![T::zero(); m], uniform(n), support_tol));
    }
    let gap_tol = T::lit(DUAL_GAP_TOL).max(T::epsilon() * T::lit(1e3)) * unit;
    let zs = z.scaled(scale.recip());
    let tol_s = gap_tol / scale;

    let lip = gram_spectral_norm(&zs) * T::lit(1.05);
    let step = lip.recip();
    let objective = |p: &[T]| {
        let q = zs.tmul(p);
        crate::scalar::dot(&q, &q)
    };

    let mut p: Vec<T> = uniform(n);
    let mut yk = p.clone();
    let mut t = T::one();
    let mut f_p = objective(&p);
    let mut q = vec![T::zero(); m];
    let mut g = vec![T::zero(); n];
    let mut best = ball_certificate(&zs, &p, tol_s, support_tol);
    let max_iter = 200_000;
    for it in 1..=max_iter {
        zs.tmul_into(&yk, &mut q);
        zs.mul_into(&q, &mut g);
        let trial: Vec<T> = yk.iter().zip(&g).map(|(&y, &gi)| y - step * gi).collect();
        let p_new = project_simplex(&trial);
        let f_new = objective(&p_new);
        if f_new > f_p {
            // adaptive restart; near the optimum this also fires on rounding
            // noise, so it must not skip the certificate check below
            yk = p.clone();
            t = T::one();
        } else {
            let t_new = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * T::lit(0.5);
            let mom = (t - T::one()) / t_new;
            yk = p_new
                .iter()
                .zip(&p)
                .map(|(&a, &b)| a + mom * (a - b))
                .collect();
            p = p_new;
            f_p = f_new;
            t = t_new;
        }

        if it % 25 == 0 || it == max_iter {
            for cand in [Some(p.clone()), polish_support(&zs, &p)].into_iter().flatten() {
                let cert = ball_certificate(&zs, &cand, tol_s, support_tol);
                if cert.gap < best.gap {
                    best = cert;
                }
            }
            if best.gap <= tol_s {
                break;
            }
        }
    }
    let mut cert = ball_certificate(z, &best.dual, gap_tol, support_tol);
    cert.separable = cert.dual_value > gap_tol;
    if cert.gap > gap_tol {
        return Err(Error::NotConverged {
            gap: cert.gap.as_f64(),
            tol: gap_tol.as_f64(),
            best: Box::new(cert.to_f64()),
        });
    }
    Ok(cert)
}

/// Active-set refinement of `min_{p∈Δ} ½‖Zᵀp‖²`: on a support `S` the
/// optimum solves `G_S p_S = λ1, 1ᵀp_S = 1` with `G = ZZᵀ`. Negative
/// coordinates leave the support and the most violating outside row enters.
fn polish_support<T: Scalar>(z: &SignedFeatureMatrix<T>, p: &[T]) -> Option<Vec<T>> {
    let n = z.rows();
    let mut support: Vec<usize> = (0..n).filter(|&i| p[i] > T::zero()).collect();
    if support.is_empty() {
        return None;
    }
    let mut current = p.to_vec();
    for _ in 0..(2 * n + 4) {
        let k = support.len();
        let mut gram = vec![T::zero(); k * k];
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate().take(a + 1) {
                let v = crate::scalar::dot(z.row(i), z.row(j));
                gram[a * k + b] = v;
                gram[b * k + a] = v;
            }
        }
        let w = solve_spd_ridge(&mut gram, k)?;
        let total: T = w.iter().copied().sum();
        if !(total > T::zero()) {
            return None;
        }
        let ps: Vec<T> = w.iter().map(|&v| v / total).collect();
        if let Some(worst) = (0..k).filter(|&a| ps[a] < T::zero()).min_by(|&a, &b| {
            ps[a].partial_cmp(&ps[b]).unwrap_or(std::cmp::Ordering::Equal)
        }) {
            support.remove(worst);
            if support.is_empty() {
                return None;
            }
            continue;
        }
        current = vec![T::zero(); n];
        for (a, &i) in support.iter().enumerate() {
            current[i] = ps[a];
        }
        let q = z.tmul(&current);
        let g = z.mul(&q);
        let level = crate::scalar::dot(&q, &q);
        let tol = T::lit(1e-13).max(T::epsilon() * T::lit(64.0));
        let entering = (0..n)
            .filter(|i| !support.contains(i))
            .filter(|&i| g[i] < level - tol)
            .min_by(|&a, &b| g[a].partial_cmp(&g[b]).unwrap_or(std::cmp::Ordering::Equal));
        match entering {
            Some(i) => support.push(i),
            None => return Some(current),
        }
    }
    Some(current)
}

/// Solves `(G + δI) w = 1` by Cholesky with a tiny ridge `δ`.
fn solve_spd_ridge<T: Scalar>(gram: &mut [T], k: usize) -> Option<Vec<T>> {
    let trace: T = (0..k).map(|i| gram[i * k + i]).sum();
    let ridge = (trace / T::from_usize_lossy(k)).max(T::min_positive_value())
        * T::lit(1e-13).max(T::epsilon() * T::lit(8.0));
    for i in 0..k {
        gram[i * k + i] += ridge;
    }
    // in-place lower Cholesky
    for j in 0..k {
        let mut d = gram[j * k + j];
        for l in 0..j {
            d -= gram[j * k + l] * gram[j * k + l];
        }
        if !(d > T::zero()) {
            return None;
        }
        let d = d.sqrt();
        gram[j * k + j] = d;
        for i in j + 1..k {
            let mut s = gram[i * k + j];
            for l in 0..j {
                s -= gram[i * k + l] * gram[j * k + l];
            }
            gram[i * k + j] = s / d;
        }
    }
    let mut w = vec![T::one(); k];
    for i in 0..k {
        let mut s = w[i];
        for l in 0..i {
            s -= gram[i * k + l] * w[l];
        }
        w[i] = s / gram[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = w[i];
        for l in i + 1..k {
            s -= gram[l * k + i] * w[l];
        }
        w[i] = s / gram[i * k + i];
    }
    Some(w)
}

/// `min_i y_i ∫ φ(θ, x_i) dν̄` for the normalized measure `ν̄ = ν/ν(S)`.
pub fn f1_margin<T: Scalar>(
    measure: &SphereMeasure<T>,
    data: &LabeledDataset<T>,
    model: &FeatureModel,
) -> Result<T> {
    let normalized = measure.normalized()?;
    let mut best = T::infinity();
    for i in 0..data.len() {
        let v = data.y(i) * normalized.predict(model, data.point(i))?;
        best = best.min(v);
    }
    Ok(best)
}

/// `count` pairs `{θ_k, T(θ_k)}` of unit directions, nested in `count` for a
/// fixed seed. For ReLU the directions are drawn on the balanced set
/// `‖a‖ = |b| = 1/√2` with `a` uniform on its sphere; for squared ReLU `a` is
/// uniform on the unit sphere with both sign channels.
pub fn reference_directions<T: Scalar>(model: &FeatureModel, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d1 = model.input_dim + 1;
    let mut out = Vec::with_capacity(2 * count);
    for _ in 0..count {
        let g: Vec<f64> = loop {
            let g: Vec<f64> = (0..d1).map(|_| StandardNormal.sample(&mut rng)).collect();
            if g.iter().map(|v| v * v).sum::<f64>() > 1e-24 {
                break g;
            }
        };
        let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (radial, last) = match model.kind {
            ActivationKind::Relu => (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
            ActivationKind::SquaredRelu => (1.0, 1.0),
        };
        let mut theta: Vec<T> = g.iter().map(|v| T::lit(v / ng * radial)).collect();
        theta.push(T::lit(last));
        let flipped = model.balance(&theta);
        out.push(theta);
        out.push(flipped);
    }
    out
}

#[derive(Debug, Clone)]
pub struct ReferenceMargin<T> {
    pub value: T,
    pub directions: Vec<Vec<T>>,
    pub certificate: MarginCertificate<T>,
}

/// Certified lower bound of `γ₁` from `grid_size` direction pairs.
pub fn gamma1_reference<T: Scalar>(
    data: &LabeledDataset<T>,
    model: &FeatureModel,
    grid_size: usize,
    seed: u64,
) -> Result<ReferenceMargin<T>> {
    if grid_size == 0 {
        return Err(Error::InvalidArgument("grid size must be >= 1".into()));
    }
    let directions = reference_directions(model, grid_size, seed);
    let z = build_direction_features(data, model, &directions)?;
    let certificate = gamma1_lp(&z)?;
    Ok(ReferenceMargin {
        value: certificate.value(),
        directions,
        certificate,
    })
}
