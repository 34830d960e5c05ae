//! Homogeneous feature maps, neuron clouds and their projection onto the sphere.
//!
//! A parameter vector `w` has `p = d + 2` coordinates. For the ReLU model
//! `w = (a, b)` with `a ∈ R^{d+1}`, `b ∈ R` and `φ(w, x) = b (a·(x,1))_+`.
//! For the squared ReLU model `w = (a, ε)` where only the sign of the last
//! coordinate is used, `φ(w, x) = ε (a·(x,1))_+²`. The sign channel takes part
//! neither in scaling nor in gradient updates.
//!
//! In both cases negating the last coordinate negates the feature, which is
//! the balance map `T`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, norm2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivationKind {
    Relu,
    SquaredRelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub kind: ActivationKind,
    pub input_dim: usize,
}

fn unit_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

impl FeatureModel {
    pub fn new(kind: ActivationKind, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be >= 1".into()));
        }
        Ok(Self { kind, input_dim })
    }

    pub fn relu(input_dim: usize) -> Self {
        Self::new(ActivationKind::Relu, input_dim).expect("input_dim >= 1")
    }

    pub fn squared_relu(input_dim: usize) -> Self {
        Self::new(ActivationKind::SquaredRelu, input_dim).expect("input_dim >= 1")
    }

    pub fn param_dim(&self) -> usize {
        self.input_dim + 2
    }

    /// `a·(x,1)` where `a` is the first `d+1` coordinates of `w`.
    #[inline]
    pub fn pre_activation<T: Scalar>(&self, w: &[T], x: &[T]) -> T {
        let d = self.input_dim;
        dot(&w[..d], x) + w[d]
    }

    /// Evaluates `φ(w, x)` after checking dimensions.
    pub fn eval<T: Scalar>(&self, w: &[T], x: &[T]) -> Result<T> {
        check_dim(self.param_dim(), w.len())?;
        check_dim(self.input_dim, x.len())?;
        Ok(self.eval_unchecked(w, x))
    }

    #[inline]
    pub fn eval_unchecked<T: Scalar>(&self, w: &[T], x: &[T]) -> T {
        let u = self.pre_activation(w, x);
        let last = w[self.input_dim + 1];
        match self.kind {
            ActivationKind::Relu => last * u.max(T::zero()),
            ActivationKind::SquaredRelu => {
                let r = u.max(T::zero());
                sign_channel(last) * r * r
            }
        }
    }

    /// Writes `∇_w φ(w, x)` into `out`. The ReLU kink uses subgradient 0 and
    /// the squared ReLU sign channel gets a zero partial derivative.
    pub fn grad_into<T: Scalar>(&self, w: &[T], x: &[T], out: &mut [T]) {
        let d = self.input_dim;
        let u = self.pre_activation(w, x);
        let last = w[d + 1];
        let (coef, last_grad) = match self.kind {
            ActivationKind::Relu => {
                if u > T::zero() {
                    (last, u)
                } else {
                    (T::zero(), T::zero())
                }
            }
            ActivationKind::SquaredRelu => {
                let r = u.max(T::zero());
                (sign_channel(last) * (r + r), T::zero())
            }
        };
        for (o, &xi) in out[..d].iter_mut().zip(x) {
            *o = coef * xi;
        }
        out[d] = coef;
        out[d + 1] = last_grad;
    }

    /// Balance map `T`: negates the output weight (ReLU) or flips the sign
    /// channel (squared ReLU).
    pub fn balance<T: Scalar>(&self, theta: &[T]) -> Vec<T> {
        let mut out = theta.to_vec();
        let last = out.len() - 1;
        out[last] = -out[last];
        out
    }

    /// Radial part of a parameter: `‖w‖` for ReLU, `‖a‖` for squared ReLU.
    pub fn radius<T: Scalar>(&self, w: &[T]) -> T {
        match self.kind {
            ActivationKind::Relu => norm2(w),
            ActivationKind::SquaredRelu => norm2(&w[..=self.input_dim]),
        }
    }

    /// Scales the homogeneous part of `w` by `r`.
    pub fn scale<T: Scalar>(&self, w: &[T], r: T) -> Vec<T> {
        let mut out: Vec<T> = w.iter().map(|&v| v * r).collect();
        if self.kind == ActivationKind::SquaredRelu {
            out[self.input_dim + 1] = w[self.input_dim + 1];
        }
        out
    }

    /// Direction of `w` on the parameter sphere, `None` for a zero radius.
    pub fn direction<T: Scalar>(&self, w: &[T]) -> Option<Vec<T>> {
        let r = self.radius(w);
        if r == T::zero() {
            return None;
        }
        let mut out: Vec<T> = w.iter().map(|&v| v / r).collect();
        if self.kind == ActivationKind::SquaredRelu {
            let last = out.len() - 1;
            out[last] = sign_channel(out[last]);
        }
        Some(out)
    }

    /// Whether `theta` lies on the parameter sphere (the `a` part for the
    /// squared ReLU model).
    pub fn is_unit<T: Scalar>(&self, theta: &[T], tol: T) -> bool {
        theta.len() == self.param_dim() && (self.radius(theta) - T::one()).abs() <= tol
    }
}

#[inline]
fn sign_channel<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

/// `m` neurons with mass `1/m` each, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronCloud<T> {
    model: FeatureModel,
    weights: Vec<T>,
    m: usize,
}

impl<T: Scalar> NeuronCloud<T> {
    pub fn new(model: FeatureModel, neurons: &[Vec<T>]) -> Result<Self> {
        let p = model.param_dim();
        let mut weights = Vec::with_capacity(neurons.len() * p);
        for w in neurons {
            check_dim(p, w.len())?;
            weights.extend_from_slice(w);
        }
        Self::from_flat(model, weights)
    }

    pub fn from_flat(model: FeatureModel, weights: Vec<T>) -> Result<Self> {
        let p = model.param_dim();
        if weights.is_empty() || !weights.len().is_multiple_of(p) {
            return Err(Error::InvalidArgument(format!(
                "flat weights of length {} do not hold a positive number of {p}-vectors",
                weights.len()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite neuron weight".into()));
        }
        let m = weights.len() / p;
        Ok(Self { model, weights, m })
    }

    pub fn model(&self) -> &FeatureModel {
        &self.model
    }

    pub fn width(&self) -> usize {
        self.m
    }

    pub fn neuron(&self, j: usize) -> &[T] {
        let p = self.model.param_dim();
        &self.weights[j * p..(j + 1) * p]
    }

    pub fn neurons(&self) -> impl Iterator<Item = &[T]> {
        self.weights.chunks_exact(self.model.param_dim())
    }

    pub fn flat(&self) -> &[T] {
        &self.weights
    }

    pub(crate) fn flat_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    /// `h_m(w, x) = (1/m) Σ_j φ(w_j, x)`.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        check_dim(self.model.input_dim, x.len())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[T]) -> T {
        let s: T = self.neurons().map(|w| self.model.eval_unchecked(w, x)).sum();
        s / T::from_usize_lossy(self.m)
    }

    /// Total mass of `Π₂(μ)`: `(1/m) Σ_j radius(w_j)²`.
    pub fn projected_mass(&self) -> T {
        let s: T = self
            .neurons()
            .map(|w| {
                let r = self.model.radius(w);
                r * r
            })
            .sum();
        s / T::from_usize_lossy(self.m)
    }

    /// `max_j | ‖a_j‖² − b_j² |`. Zero on the balanced set for ReLU; not
    /// meaningful for the squared ReLU model, which returns zero.
    pub fn balance_drift(&self) -> T {
        if self.model.kind == ActivationKind::SquaredRelu {
            return T::zero();
        }
        let d = self.model.input_dim;
        self.neurons()
            .map(|w| {
                let a2 = dot(&w[..=d], &w[..=d]);
                (a2 - w[d + 1] * w[d + 1]).abs()
            })
            .fold(T::zero(), T::max)
    }

    /// Multiplies the radial part of every neuron by `r`.
    pub fn scaled(&self, r: T) -> Self {
        let weights = self
            .neurons()
            .flat_map(|w| self.model.scale(w, r))
            .collect();
        Self {
            model: self.model,
            weights,
            m: self.m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub point: Vec<T>,
    pub mass: T,
}

/// Nonnegative weighted atoms on the parameter sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMeasure<T> {
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> SphereMeasure<T> {
    pub fn empty() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn new(model: &FeatureModel, atoms: Vec<Atom<T>>) -> Result<Self> {
        let tol = unit_tol::<T>();
        for atom in &atoms {
            check_dim(model.param_dim(), atom.point.len())?;
            if !model.is_unit(&atom.point, tol) {
                return Err(Error::InvalidArgument("atom off the unit sphere".into()));
            }
            if !(atom.mass >= T::zero()) || !atom.mass.is_finite() {
                return Err(Error::InvalidArgument("atom mass must be finite and >= 0".into()));
            }
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    point: a.point.clone(),
                    mass: a.mass * c,
                })
                .collect(),
        }
    }

    /// The probability measure `ν / ν(S)`.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total_mass();
        if total <= T::zero() {
            return Err(Error::ZeroMass);
        }
        Ok(self.scaled(total.recip()))
    }

    /// `Σ_k mass_k φ(θ_k, x)`.
    pub fn predict(&self, model: &FeatureModel, x: &[T]) -> Result<T> {
        check_dim(model.input_dim, x.len())?;
        let mut s = T::zero();
        for atom in &self.atoms {
            check_dim(model.param_dim(), atom.point.len())?;
            s += atom.mass * model.eval_unchecked(&atom.point, x);
        }
        Ok(s)
    }
}

/// `Π₂(μ_m)`: one atom `(w_j/‖w_j‖, ‖w_j‖²/m)` per nonzero neuron.
pub fn project_h2<T: Scalar>(cloud: &NeuronCloud<T>) -> SphereMeasure<T> {
    let model = cloud.model();
    let inv_m = T::from_usize_lossy(cloud.width()).recip();
    let atoms = cloud
        .neurons()
        .filter_map(|w| {
            let r = model.radius(w);
            model.direction(w).map(|point| Atom {
                point,
                mass: r * r * inv_m,
            })
        })
        .collect();
    SphereMeasure { atoms }
}

pub fn predict<T: Scalar>(measure: &SphereMeasure<T>, model: &FeatureModel, x: &[T]) -> Result<T> {
    measure.predict(model, x)
}

/// Signed atoms on the sphere of `a ∈ R^{d+1}`, for the unbalanced ReLU
/// feature `φ̃(a, x) = (a·(x,1))_+`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedAtoms<T> {
    pub atoms: Vec<Atom<T>>,
}

impl<T: Scalar> SignedAtoms<T> {
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let dim = atoms.first().map(|a| a.point.len()).unwrap_or(0);
        let tol = unit_tol::<T>();
        for atom in &atoms {
            check_dim(dim, atom.point.len())?;
            if (norm2(&atom.point) - T::one()).abs() > tol {
                return Err(Error::InvalidArgument("atom off the unit sphere".into()));
            }
            if !atom.mass.is_finite() {
                return Err(Error::InvalidArgument("non-finite signed mass".into()));
            }
        }
        Ok(Self { atoms })
    }

    /// `|ν|(S)`, the total variation.
    pub fn total_variation(&self) -> T {
        self.atoms.iter().map(|a| a.mass.abs()).sum()
    }

    /// `∫ (a·(x,1))_+ dν(a)`.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        let mut s = T::zero();
        for atom in &self.atoms {
            check_dim(x.len() + 1, atom.point.len())?;
            let u = dot(&atom.point[..x.len()], x) + atom.point[x.len()];
            s += atom.mass * u.max(T::zero());
        }
        Ok(s)
    }
}

/// Lifts a signed measure for `φ̃` to a nonnegative measure for the ReLU
/// feature `φ`: positive mass at `a` becomes mass `2ν₊` at `(a, 1)/√2`,
/// negative mass becomes `2ν₋` at `(a, −1)/√2`. The predictor is unchanged
/// and the total mass doubles.
pub fn lift_signed<T: Scalar>(nu: &SignedAtoms<T>) -> Result<SphereMeasure<T>> {
    let Some(first) = nu.atoms.first() else {
        return Ok(SphereMeasure::empty());
    };
    let model = FeatureModel::relu(first.point.len() - 1);
    let inv_sqrt2 = T::FRAC_1_SQRT_2();
    let two = T::lit(2.0);
    let atoms = nu
        .atoms
        .iter()
        .filter(|a| a.mass != T::zero())
        .map(|a| {
            let sign = if a.mass > T::zero() { T::one() } else { -T::one() };
            let mut point: Vec<T> = a.point.iter().map(|&v| v * inv_sqrt2).collect();
            point.push(sign * inv_sqrt2);
            Atom {
                point,
                mass: two * a.mass.abs(),
            }
        })
        .collect();
    SphereMeasure::new(&model, atoms)
}

/// Pushes a nonnegative ReLU measure on `S^{p−1}` to a signed measure on
/// `S^{p−2}`: atom `((a, c), μ)` becomes signed mass `c‖a‖μ` at `a/‖a‖`.
/// The predictor is unchanged and the total variation is at most half the
/// input mass.
pub fn project_signed<T: Scalar>(measure: &SphereMeasure<T>) -> SignedAtoms<T> {
    let atoms = measure
        .atoms()
        .iter()
        .filter_map(|atom| {
            let (a, c) = atom.point.split_at(atom.point.len() - 1);
            let na = norm2(a);
            if na == T::zero() {
                return None;
            }
            Some(Atom {
                point: a.iter().map(|&v| v / na).collect(),
                mass: c[0] * na * atom.mass,
            })
        })
        .collect();
    SignedAtoms { atoms }
}
