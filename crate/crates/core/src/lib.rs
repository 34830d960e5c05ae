//! Wide two-layer networks with 2-homogeneous activations trained on the
//! smooth margin: training dynamics, discrete max-margin solvers with
//! optimality certificates, the cluster-grid benchmark and a margin-based
//! generalization bound.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod datagen;
pub mod design;
pub mod error;
pub mod experiment;
pub mod features;
pub mod margins;
pub mod scalar;
pub mod smoothmargin;
pub mod trainer;

pub use bounds::{margin_bound, BoundInputs, MarginBound};
pub use datagen::{interclass_distance, test_error, ClusterGridSpec, InterclassStrategy, LabeledDataset};
pub use design::SignedFeatureMatrix;
pub use error::{Error, Result};
pub use features::{ActivationKind, FeatureModel, NeuronCloud, SphereMeasure};
pub use margins::{certify, f1_margin, gamma1_lp, gamma1_reference, gamma2_dual, margin, MarginCertificate};
pub use scalar::Scalar;
pub use smoothmargin::LossKind;
pub use trainer::{InitScheme, Mode, StepRule, TrainConfig, Trajectory};

pub type Cloud = NeuronCloud<f64>;
pub type Measure = SphereMeasure<f64>;
pub type FeatureMatrix = SignedFeatureMatrix<f64>;
pub type Certificate = MarginCertificate<f64>;
pub type Dataset = LabeledDataset<f64>;
pub type Traj = Trajectory<f64>;
