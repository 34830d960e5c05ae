//! Training dynamics: full two-layer gradient ascent on `F_m(w) = S(ĥ_m(w))`,
//! mirror ascent on fixed directions and projected ascent on the output layer.
//!
//! Each dynamic is a small state machine implementing [`Dynamics`]; [`drive`]
//! runs one for a number of steps and records a [`Trajectory`].

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datagen::LabeledDataset;
use crate::design::SignedFeatureMatrix;
use crate::error::{check_dim, Error, Result};
use crate::features::{ActivationKind, FeatureModel, NeuronCloud};
use crate::margins::{gamma1_lp, gamma2_dual, margin};
use crate::scalar::{dot, norm2, Scalar};
use crate::smoothmargin::{g_beta_from_margins, smooth_margin, smooth_margin_grad_into, softmin_weights_into, LossKind};

pub use crate::design::{build_direction_features, build_signed_features, hidden_layer_features};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    TwoLayer,
    FixedDirections,
    OutputLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// `1/(16‖z‖_∞√(t+1))` for fixed directions, `β(t)√2/(‖z‖_∞√(t+1))` for
    /// the output layer and `0.05/max_i ‖(x_i,1)‖²` for two-layer training.
    PaperSchedule,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitScheme {
    /// Input weights uniform on the sphere of radius `1/√2`, output weights
    /// `±1/√2`; every neuron is balanced and has unit norm.
    BalancedSphere,
    /// I.i.d. `N(0, σ²)` entries.
    Gaussian(f64),
    /// `r(0) = 1`.
    UniformMass,
    /// `r(0) = 0`.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub loss: LossKind,
    pub steps: usize,
    pub step_rule: StepRule,
    pub init: InitScheme,
    pub seed: u64,
    pub record_every: usize,
}

impl TrainConfig {
    /// Exponential loss, default step schedule and the initialization each mode's
    /// guarantees are stated for.
    pub fn new(mode: Mode, steps: usize) -> Self {
        let init = match mode {
            Mode::TwoLayer => InitScheme::BalancedSphere,
            Mode::FixedDirections => InitScheme::UniformMass,
            Mode::OutputLayer => InitScheme::Zero,
        };
        Self {
            mode,
            loss: LossKind::Exponential,
            steps,
            step_rule: StepRule::PaperSchedule,
            init,
            seed: 0,
            record_every: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        if let StepRule::Constant(eta) = self.step_rule {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::InvalidArgument(format!("constant step must be positive, got {eta}")));
            }
        }
        if let InitScheme::Gaussian(sigma) = self.init {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidArgument(format!("gaussian scale must be positive, got {sigma}")));
            }
        }
        match self.mode {
            Mode::TwoLayer => {
                if matches!(self.init, InitScheme::UniformMass | InitScheme::Zero) {
                    return Err(Error::InvalidArgument(
                        "two-layer training needs a balanced-sphere or gaussian initialization".into(),
                    ));
                }
            }
            Mode::FixedDirections | Mode::OutputLayer => {
                if self.loss != LossKind::Exponential {
                    return Err(Error::InvalidArgument(
                        "fixed-direction and output-layer dynamics use the exponential loss".into(),
                    ));
                }
                let wanted = if self.mode == Mode::FixedDirections {
                    InitScheme::UniformMass
                } else {
                    InitScheme::Zero
                };
                if self.step_rule == StepRule::PaperSchedule && self.init != wanted {
                    return Err(Error::InvalidArgument(format!(
                        "the default step schedule in {:?} mode requires {wanted:?} initialization",
                        self.mode
                    )));
                }
                if self.init == InitScheme::BalancedSphere {
                    return Err(Error::InvalidArgument(
                        "balanced-sphere initialization applies to two-layer training only".into(),
                    ));
                }
                if self.mode == Mode::FixedDirections && self.init == InitScheme::Zero {
                    return Err(Error::InvalidArgument("r(0) = 0 is a fixed point of the mirror dynamics".into()));
                }
            }
        }
        Ok(())
    }

    fn expect_mode(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidArgument(format!("expected {mode:?} mode, got {:?}", self.mode)));
        }
        self.validate()
    }
}

/// Whether the rate guarantee of the fixed-feature dynamics applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateGuarantee {
    Unchecked,
    /// Separable by the fixed features with the given max-min margin.
    Holds { gamma: f64 },
    /// Max-min margin `≤ 0`: the rate statement is void.
    Void { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record<T> {
    pub t: usize,
    pub objective: T,
    pub raw_margin: T,
    pub beta: T,
    pub norm_margin: T,
    /// `max_{s<t}` of the normalized margin.
    pub best_margin: T,
    /// `Σ_{s<t} 1/(β(s)√(s+1))`. Not serialized to CSV.
    #[serde(skip)]
    pub rate_sum: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub records: Vec<Record<T>>,
    pub guarantee: RateGuarantee,
    /// Normalized iterate with the best margin (fixed/output modes).
    pub best_iterate: Vec<T>,
    /// Normalized iterate after the last step (fixed/output modes).
    pub final_iterate: Vec<T>,
}

pub const TRAJECTORY_HEADER: &str = "t,objective,raw_margin,beta,norm_margin,best_margin";

impl<T: Scalar> Trajectory<T> {
    pub fn last(&self) -> &Record<T> {
        self.records.last().expect("trajectory has at least one record")
    }

    pub fn best_margin(&self) -> T {
        let r = self.last();
        r.best_margin.max(r.norm_margin)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t,
                r.objective.as_f64(),
                r.raw_margin.as_f64(),
                r.beta.as_f64(),
                r.norm_margin.as_f64(),
                r.best_margin.as_f64()
            )?;
        }
        Ok(())
    }
}

/// Recording cadence: powers of two, multiples of `every`, and the last step.
pub fn is_record_step(t: usize, every: usize, total: usize) -> bool {
    t >= 1 && (t.is_power_of_two() || t.is_multiple_of(every) || t == total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T> {
    pub objective: T,
    pub raw_margin: T,
    pub beta: T,
    pub norm_margin: T,
}

pub trait Dynamics<T: Scalar> {
    /// Number of steps taken so far.
    fn t(&self) -> usize;
    fn metrics(&self) -> Metrics<T>;
    fn step(&mut self) -> Result<()>;
    /// Normalized iterate, empty for two-layer training.
    fn iterate(&self) -> Vec<T> {
        Vec::new()
    }
}

/// Runs `steps` iterations and records the trajectory.
pub fn drive<T: Scalar, D: Dynamics<T>>(state: &mut D, steps: usize, record_every: usize) -> Result<Trajectory<T>> {
    let mut records = Vec::new();
    let mut best = T::neg_infinity();
    let mut best_iterate = state.iterate();
    let mut rate_sum = T::zero();
    let start = state.t();
    for s in 0..=steps {
        let m = state.metrics();
        if !m.norm_margin.is_finite() || !m.beta.is_finite() {
            return Err(Error::NonFinite { step: start + s });
        }
        if is_record_step(s, record_every, steps) {
            records.push(Record {
                t: s,
                objective: m.objective,
                raw_margin: m.raw_margin,
                beta: m.beta,
                norm_margin: m.norm_margin,
                best_margin: best,
                rate_sum,
            });
        }
        if m.norm_margin > best {
            best = m.norm_margin;
            best_iterate = state.iterate();
        }
        rate_sum += (m.beta * T::from_usize_lossy(s + 1).sqrt()).recip();
        if s < steps {
            state.step()?;
        }
    }
    Ok(Trajectory {
        records,
        guarantee: RateGuarantee::Unchecked,
        best_iterate,
        final_iterate: state.iterate(),
    })
}

fn step_size<T: Scalar>(rule: StepRule, default: impl FnOnce() -> T) -> T {
    match rule {
        StepRule::PaperSchedule => default(),
        StepRule::Constant(eta) => T::lit(eta),
    }
}

/// `r(0)` for the fixed-feature dynamics.
pub fn init_radii<T: Scalar>(scheme: InitScheme, m: usize, seed: u64) -> Result<Vec<T>> {
    match scheme {
        InitScheme::UniformMass => Ok(vec![T::one(); m]),
        InitScheme::Zero => Ok(vec![T::zero(); m]),
        InitScheme::Gaussian(sigma) => {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::InvalidArgument(format!("gaussian scale {sigma}: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..m).map(|_| T::lit(normal.sample(&mut rng))).collect())
        }
        InitScheme::BalancedSphere => Err(Error::InvalidArgument(
            "balanced-sphere initialization applies to neuron clouds".into(),
        )),
    }
}

/// Initial neuron cloud of width `m`.
pub fn init_cloud<T: Scalar>(scheme: InitScheme, model: &FeatureModel, m: usize, seed: u64) -> Result<NeuronCloud<T>> {
    if m == 0 {
        return Err(Error::InvalidArgument("width must be >= 1".into()));
    }
    let d1 = model.input_dim + 1;
    let p = model.param_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Vec::with_capacity(m * p);
    match scheme {
        InitScheme::BalancedSphere => {
            let (radius, out) = match model.kind {
                ActivationKind::Relu => (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
                ActivationKind::SquaredRelu => (1.0, 1.0),
            };
            for _ in 0..m {
                let g: Vec<f64> = loop {
                    let g: Vec<f64> = (0..d1).map(|_| StandardNormal.sample(&mut rng)).collect();
                    if g.iter().any(|v| *v != 0.0) {
                        break g;
                    }
                };
                let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                w.extend(g.iter().map(|v| T::lit(v / ng * radius)));
                let sign = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 };
                w.push(T::lit(sign * out));
            }
        }
        InitScheme::Gaussian(sigma) => {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::InvalidArgument(format!("gaussian scale {sigma}: {e}")))?;
            for _ in 0..m {
                w.extend((0..d1).map(|_| T::lit(normal.sample(&mut rng))));
                let last = normal.sample(&mut rng);
                w.push(T::lit(match model.kind {
                    ActivationKind::Relu => last,
                    ActivationKind::SquaredRelu => last.signum(),
                }));
            }
        }
        InitScheme::UniformMass | InitScheme::Zero => {
            return Err(Error::InvalidArgument(format!("{scheme:?} does not define a neuron cloud")));
        }
    }
    NeuronCloud::from_flat(*model, w)
}

/// `0.05 / max_i ‖(x_i, 1)‖²`.
pub fn default_two_layer_step<T: Scalar>(data: &LabeledDataset<T>) -> T {
    let max = data
        .points()
        .iter()
        .map(|x| dot(x, x) + T::one())
        .fold(T::one(), T::max);
    T::lit(0.05) / max
}

/// `a_j ← a_j (1 + 2η g_j)²`, the image of `r ← r + η m ∇_r F` under `a = r²/m`.
pub fn mirror_step<T: Scalar>(a: &mut [T], g: &[T], eta: T) {
    let two = T::lit(2.0);
    for (aj, &gj) in a.iter_mut().zip(g) {
        let f = T::one() + two * eta * gj;
        *aj *= f * f;
    }
}

/// Mirror ascent on fixed directions, stored as `(ā, β)` with `a = β ā`.
pub struct FixedDirections<'a, T> {
    z: &'a SignedFeatureMatrix<T>,
    abar: Vec<T>,
    beta: T,
    t: usize,
    rule: StepRule,
    za: Vec<T>,
    p: Vec<T>,
    g: Vec<T>,
}

impl<'a, T: Scalar> FixedDirections<'a, T> {
    pub fn new(z: &'a SignedFeatureMatrix<T>, cfg: &TrainConfig) -> Result<Self> {
        cfg.expect_mode(Mode::FixedDirections)?;
        if cfg.step_rule == StepRule::PaperSchedule && z.inf_norm() == T::zero() {
            return Err(Error::ZeroFeatures);
        }
        let m = z.cols();
        let r: Vec<T> = init_radii(cfg.init, m, cfg.seed)?;
        let inv_m = T::from_usize_lossy(m).recip();
        let a: Vec<T> = r.iter().map(|&v| v * v * inv_m).collect();
        let beta: T = a.iter().copied().sum();
        if !(beta > T::zero()) {
            return Err(Error::ZeroMass);
        }
        let abar = a.iter().map(|&v| v / beta).collect();
        let mut s = Self {
            z,
            abar,
            beta,
            t: 0,
            rule: cfg.step_rule,
            za: vec![T::zero(); z.rows()],
            p: vec![T::zero(); z.rows()],
            g: vec![T::zero(); m],
        };
        s.refresh();
        Ok(s)
    }

    fn refresh(&mut self) {
        self.z.mul_into(&self.abar, &mut self.za);
        // ∇G_1(a) = ∇G_β(ā)
        softmin_weights_into(&self.za, self.beta, &mut self.p);
        self.z.tmul_into(&self.p, &mut self.g);
    }

    pub fn step_size(&self) -> T {
        step_size(self.rule, || {
            (T::lit(16.0) * self.z.inf_norm() * T::from_usize_lossy(self.t + 1).sqrt()).recip()
        })
    }

    pub fn normalized(&self) -> &[T] {
        &self.abar
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// `∇G_1(a(t))`.
    pub fn gradient(&self) -> &[T] {
        &self.g
    }
}

impl<T: Scalar> Dynamics<T> for FixedDirections<'_, T> {
    fn t(&self) -> usize {
        self.t
    }

    fn metrics(&self) -> Metrics<T> {
        let norm_margin = margin(&self.za);
        let raw: Vec<T> = self.za.iter().map(|&v| v * self.beta).collect();
        Metrics {
            objective: g_beta_from_margins(&raw, T::one()),
            raw_margin: norm_margin * self.beta,
            beta: self.beta,
            norm_margin,
        }
    }

    fn step(&mut self) -> Result<()> {
        let eta = self.step_size();
        mirror_step(&mut self.abar, &self.g, eta);
        let s: T = self.abar.iter().copied().sum();
        self.beta *= s;
        self.t += 1;
        if !(s > T::zero()) || !self.beta.is_finite() {
            return Err(Error::NonFinite { step: self.t });
        }
        self.abar.iter_mut().for_each(|v| *v /= s);
        self.refresh();
        Ok(())
    }

    fn iterate(&self) -> Vec<T> {
        self.abar.clone()
    }
}

/// Gradient ascent on the output layer, stored as `(ā, β)` with
/// `β(t) = max{1, max_{s≤t} √m‖a(s)‖₂}` so that `√m‖ā‖₂ ≤ 1`.
pub struct OutputLayer<'a, T> {
    z: &'a SignedFeatureMatrix<T>,
    abar: Vec<T>,
    beta: T,
    t: usize,
    rule: StepRule,
    za: Vec<T>,
    p: Vec<T>,
    g: Vec<T>,
}

impl<'a, T: Scalar> OutputLayer<'a, T> {
    pub fn new(z: &'a SignedFeatureMatrix<T>, cfg: &TrainConfig) -> Result<Self> {
        cfg.expect_mode(Mode::OutputLayer)?;
        if cfg.step_rule == StepRule::PaperSchedule && z.inf_norm() == T::zero() {
            return Err(Error::ZeroFeatures);
        }
        let m = z.cols();
        let r: Vec<T> = init_radii(cfg.init, m, cfg.seed)?;
        let inv_m = T::from_usize_lossy(m).recip();
        let a: Vec<T> = r.iter().map(|&v| v * inv_m).collect();
        let beta = (T::from_usize_lossy(m).sqrt() * norm2(&a)).max(T::one());
        let abar = a.iter().map(|&v| v / beta).collect();
        let mut s = Self {
            z,
            abar,
            beta,
            t: 0,
            rule: cfg.step_rule,
            za: vec![T::zero(); z.rows()],
            p: vec![T::zero(); z.rows()],
            g: vec![T::zero(); m],
        };
        s.refresh();
        Ok(s)
    }

    fn refresh(&mut self) {
        self.z.mul_into(&self.abar, &mut self.za);
        softmin_weights_into(&self.za, self.beta, &mut self.p);
        self.z.tmul_into(&self.p, &mut self.g);
    }

    pub fn step_size(&self) -> T {
        step_size(self.rule, || {
            self.beta * T::SQRT_2() / (self.z.inf_norm() * T::from_usize_lossy(self.t + 1).sqrt())
        })
    }

    pub fn normalized(&self) -> &[T] {
        &self.abar
    }

    pub fn beta(&self) -> T {
        self.beta
    }
}

impl<T: Scalar> Dynamics<T> for OutputLayer<'_, T> {
    fn t(&self) -> usize {
        self.t
    }

    fn metrics(&self) -> Metrics<T> {
        let norm_margin = margin(&self.za);
        let raw: Vec<T> = self.za.iter().map(|&v| v * self.beta).collect();
        Metrics {
            objective: g_beta_from_margins(&raw, T::one()),
            raw_margin: norm_margin * self.beta,
            beta: self.beta,
            norm_margin,
        }
    }

    fn step(&mut self) -> Result<()> {
        let m = T::from_usize_lossy(self.z.cols());
        // b = a(t+1)/β(t) = ā + (η/(mβ)) ∇G_β(ā)
        let c = self.step_size() / (m * self.beta);
        for (a, &g) in self.abar.iter_mut().zip(&self.g) {
            *a += c * g;
        }
        let shrink = (m.sqrt() * norm2(&self.abar)).max(T::one());
        self.abar.iter_mut().for_each(|v| *v /= shrink);
        self.beta *= shrink;
        self.t += 1;
        if !self.beta.is_finite() || self.abar.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: self.t });
        }
        self.refresh();
        Ok(())
    }

    fn iterate(&self) -> Vec<T> {
        self.abar.clone()
    }
}

/// Explicit Euler ascent `w ← w + η m ∇F_m(w)` on the full network.
pub struct TwoLayer<'a, T> {
    data: &'a LabeledDataset<T>,
    cloud: NeuronCloud<T>,
    loss: LossKind,
    eta: T,
    t: usize,
    /// Row-major `(x_i, 1)`.
    inputs: Vec<T>,
    /// Pre-activations `a_j·(x_i, 1)`, neuron-major.
    pre: Vec<T>,
    u: Vec<T>,
    weights: Vec<T>,
}

impl<'a, T: Scalar> TwoLayer<'a, T> {
    pub fn new(data: &'a LabeledDataset<T>, cloud: NeuronCloud<T>, cfg: &TrainConfig) -> Result<Self> {
        cfg.expect_mode(Mode::TwoLayer)?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim(cloud.model().input_dim, data.dim())?;
        let eta = step_size(cfg.step_rule, || default_two_layer_step(data));
        let n = data.len();
        let inputs = data
            .points()
            .iter()
            .flat_map(|x| x.iter().copied().chain(std::iter::once(T::one())))
            .collect();
        let mut s = Self {
            data,
            pre: vec![T::zero(); n * cloud.width()],
            cloud,
            loss: cfg.loss,
            eta,
            t: 0,
            inputs,
            u: vec![T::zero(); n],
            weights: vec![T::zero(); n],
        };
        s.refresh();
        Ok(s)
    }

    fn refresh(&mut self) {
        let model = *self.cloud.model();
        let d1 = model.input_dim + 1;
        let n = self.data.len();
        self.u.iter_mut().for_each(|v| *v = T::zero());
        for (w, pre) in self.cloud.neurons().zip(self.pre.chunks_exact_mut(n)) {
            let out = output_factor(&model, w[d1]);
            for ((pv, x), h) in pre.iter_mut().zip(self.inputs.chunks_exact(d1)).zip(self.u.iter_mut()) {
                let v = dot(&w[..d1], x);
                *pv = v;
                if v > T::zero() {
                    *h += match model.kind {
                        ActivationKind::Relu => out * v,
                        ActivationKind::SquaredRelu => out * v * v,
                    };
                }
            }
        }
        let inv_m = T::from_usize_lossy(self.cloud.width()).recip();
        for (i, h) in self.u.iter_mut().enumerate() {
            *h = self.data.y(i) * *h * inv_m;
        }
        smooth_margin_grad_into(self.loss, &self.u, &mut self.weights);
    }

    pub fn cloud(&self) -> &NeuronCloud<T> {
        &self.cloud
    }

    pub fn into_cloud(self) -> NeuronCloud<T> {
        self.cloud
    }

    pub fn step_size(&self) -> T {
        self.eta
    }

    /// Margins `u_i = y_i ĥ_m(x_i)` of the current network.
    pub fn margins(&self) -> &[T] {
        &self.u
    }
}

/// Output weight for ReLU, sign channel for squared ReLU.
fn output_factor<T: Scalar>(model: &FeatureModel, last: T) -> T {
    match model.kind {
        ActivationKind::Relu => last,
        ActivationKind::SquaredRelu if last < T::zero() => -T::one(),
        ActivationKind::SquaredRelu => T::one(),
    }
}

impl<T: Scalar> Dynamics<T> for TwoLayer<'_, T> {
    fn t(&self) -> usize {
        self.t
    }

    fn metrics(&self) -> Metrics<T> {
        let raw_margin = margin(&self.u);
        let beta = self.cloud.projected_mass();
        Metrics {
            objective: smooth_margin(self.loss, &self.u),
            raw_margin,
            beta,
            // min_i y_i ∫φ dν̄ with ν̄ = Π₂(μ)/mass
            norm_margin: raw_margin / beta,
        }
    }

    fn step(&mut self) -> Result<()> {
        let model = *self.cloud.model();
        let d1 = model.input_dim + 1;
        let n = self.data.len();
        let eta = self.eta;
        let coef: Vec<T> = (0..n).map(|i| self.weights[i] * self.data.y(i)).collect();
        let mut acc = vec![T::zero(); d1];
        for (w, pre) in self.cloud.flat_mut().chunks_exact_mut(d1 + 1).zip(self.pre.chunks_exact(n)) {
            let out = output_factor(&model, w[d1]);
            acc.iter_mut().for_each(|v| *v = T::zero());
            let mut acc_last = T::zero();
            // ∇φ vanishes where the pre-activation is ≤ 0 (kink subgradient 0)
            for ((&v, &c), x) in pre.iter().zip(&coef).zip(self.inputs.chunks_exact(d1)) {
                if v <= T::zero() || c == T::zero() {
                    continue;
                }
                let f = match model.kind {
                    ActivationKind::Relu => {
                        acc_last += c * v;
                        c * out
                    }
                    ActivationKind::SquaredRelu => c * out * (v + v),
                };
                for (a, &xk) in acc.iter_mut().zip(x) {
                    *a += f * xk;
                }
            }
            for (wk, &a) in w[..d1].iter_mut().zip(&acc) {
                *wk += eta * a;
            }
            if model.kind == ActivationKind::Relu {
                w[d1] += eta * acc_last;
            }
        }
        self.t += 1;
        if self.cloud.flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: self.t });
        }
        self.refresh();
        Ok(())
    }
}

pub fn train_two_layer<T: Scalar>(
    data: &LabeledDataset<T>,
    model: &FeatureModel,
    width: usize,
    cfg: &TrainConfig,
) -> Result<(NeuronCloud<T>, Trajectory<T>)> {
    cfg.expect_mode(Mode::TwoLayer)?;
    let cloud = init_cloud(cfg.init, model, width, cfg.seed)?;
    train_two_layer_from(data, cloud, cfg)
}

/// Two-layer training from a given initial cloud.
pub fn train_two_layer_from<T: Scalar>(
    data: &LabeledDataset<T>,
    cloud: NeuronCloud<T>,
    cfg: &TrainConfig,
) -> Result<(NeuronCloud<T>, Trajectory<T>)> {
    let mut state = TwoLayer::new(data, cloud, cfg)?;
    let traj = drive(&mut state, cfg.steps, cfg.record_every)?;
    Ok((state.into_cloud(), traj))
}

/// Mirror ascent on fixed directions. The trajectory is flagged with the
/// exact `γ₁⁽ᵐ⁾`.
pub fn train_fixed_directions<T: Scalar>(z: &SignedFeatureMatrix<T>, cfg: &TrainConfig) -> Result<Trajectory<T>> {
    let mut traj = run_fixed_directions(z, cfg)?;
    traj.guarantee = match gamma1_lp(z) {
        Ok(c) => guarantee(c.value().as_f64()),
        Err(_) => RateGuarantee::Unchecked,
    };
    Ok(traj)
}

/// [`train_fixed_directions`] without solving for `γ₁⁽ᵐ⁾`.
pub fn run_fixed_directions<T: Scalar>(z: &SignedFeatureMatrix<T>, cfg: &TrainConfig) -> Result<Trajectory<T>> {
    let mut state = FixedDirections::new(z, cfg)?;
    drive(&mut state, cfg.steps, cfg.record_every)
}

/// Projected ascent on the output layer. The trajectory is flagged with
/// `γ₂⁽ᵐ⁾` from the dual solver.
pub fn train_output_layer<T: Scalar>(z: &SignedFeatureMatrix<T>, cfg: &TrainConfig) -> Result<Trajectory<T>> {
    let mut traj = run_output_layer(z, cfg)?;
    traj.guarantee = match gamma2_dual(z) {
        Ok(c) => guarantee(c.value().as_f64()),
        Err(_) => RateGuarantee::Unchecked,
    };
    Ok(traj)
}

/// [`train_output_layer`] without solving for `γ₂⁽ᵐ⁾`.
pub fn run_output_layer<T: Scalar>(z: &SignedFeatureMatrix<T>, cfg: &TrainConfig) -> Result<Trajectory<T>> {
    let mut state = OutputLayer::new(z, cfg)?;
    drive(&mut state, cfg.steps, cfg.record_every)
}

fn guarantee(gamma: f64) -> RateGuarantee {
    if gamma > 0.0 {
        RateGuarantee::Holds { gamma }
    } else {
        RateGuarantee::Void { gamma }
    }
}

/// `max_j |(‖a_j‖² − b_j²)(end) − (‖a_j‖² − b_j²)(start)|` for ReLU clouds.
pub fn balance_drift<T: Scalar>(start: &NeuronCloud<T>, end: &NeuronCloud<T>) -> T {
    let model = start.model();
    if model.kind == ActivationKind::SquaredRelu || start.width() != end.width() {
        return T::zero();
    }
    let d = model.input_dim;
    let gap = |w: &[T]| dot(&w[..=d], &w[..=d]) - w[d + 1] * w[d + 1];
    start
        .neurons()
        .zip(end.neurons())
        .map(|(a, b)| (gap(b) - gap(a)).abs())
        .fold(T::zero(), T::max)
}
