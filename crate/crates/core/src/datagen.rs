//! Labeled datasets, the cluster-grid distribution and the projected
//! interclass distance.
//!
//! The cluster grid places `k²` disks of radius `1/(3k−1)` on a square grid
//! of step `3/(3k−1)` in the first two coordinates; the remaining `d−2`
//! coordinates are uniform on `[−1/2, 1/2]`. Each disk carries a class.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    points: Vec<Vec<T>>,
    labels: Vec<i8>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(points: Vec<Vec<T>>, labels: Vec<i8>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim(points.len(), labels.len())?;
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("points must have dimension >= 1".into()));
        }
        for x in &points {
            check_dim(d, x.len())?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite input coordinate".into()));
            }
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidArgument("labels must be -1 or +1".into()));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    /// Label `y_i` as a scalar `±1`.
    pub fn y(&self, i: usize) -> T {
        if self.labels[i] > 0 {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], i8)> {
        self.points.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&1) && self.labels.contains(&-1)
    }

    pub fn with_label_flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.labels[i] = -out.labels[i];
        out
    }

    pub fn cast<U: Scalar>(&self) -> LabeledDataset<U> {
        LabeledDataset {
            points: self
                .points
                .iter()
                .map(|x| x.iter().map(|&v| U::lit(v.as_f64())).collect())
                .collect(),
            labels: self.labels.clone(),
        }
    }
}

impl LabeledDataset<f64> {
    /// CSV with header `x1,...,xd,y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (x, y) in self.iter() {
            let mut rec: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().next_back() != Some("y") {
            return Err(Error::Parse("dataset CSV must end with a `y` column".into()));
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut vals = Vec::with_capacity(rec.len());
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("{field:?}: {e}")))?;
                vals.push(v);
            }
            let y = vals.pop().ok_or_else(|| Error::Parse("empty record".into()))?;
            labels.push(if y > 0.0 { 1 } else { -1 });
            if y != 1.0 && y != -1.0 {
                return Err(Error::Parse(format!("label {y} is not -1 or +1")));
            }
            points.push(vals);
        }
        Self::new(points, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

const CLASS_STREAM: u64 = 0;
const POINT_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGridSpec {
    pub k: usize,
    pub d: usize,
    pub seed: u64,
    /// Class of each cluster, row-major over the `k × k` grid.
    pub classes: Vec<i8>,
}

impl ClusterGridSpec {
    /// Draws the `k²` cluster classes from an independent sub-stream of `seed`.
    pub fn new(k: usize, d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(CLASS_STREAM);
        let classes = (0..k * k)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self::with_classes(k, d, seed, classes)
    }

    pub fn with_classes(k: usize, d: usize, seed: u64, classes: Vec<i8>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("grid side k must be >= 1".into()));
        }
        if d < 2 {
            return Err(Error::InvalidArgument("cluster grid needs d >= 2".into()));
        }
        check_dim(k * k, classes.len())?;
        if classes.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidArgument("cluster classes must be -1 or +1".into()));
        }
        Ok(Self { k, d, seed, classes })
    }

    pub fn radius(&self) -> f64 {
        1.0 / (3 * self.k - 1) as f64
    }

    pub fn step(&self) -> f64 {
        3.0 / (3 * self.k - 1) as f64
    }

    /// Center of cluster `c = row * k + col` in the first two coordinates.
    pub fn center(&self, c: usize) -> [f64; 2] {
        let (row, col) = (c / self.k, c % self.k);
        let origin = -0.5 + self.radius();
        [origin + col as f64 * self.step(), origin + row as f64 * self.step()]
    }

    /// Known lower bound `1/(3k−1)` of the population interclass distance in
    /// the first coordinate plane, valid when both classes are present.
    pub fn delta2_lower_bound(&self) -> f64 {
        self.radius()
    }

    pub fn sample(&self, n: usize) -> Result<LabeledDataset<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(POINT_STREAM);
        self.sample_from(&mut rng, n)
    }

    /// Fresh samples with the same cluster classes, drawn from `seed`.
    pub fn sample_with_seed(&self, n: usize, seed: u64) -> Result<LabeledDataset<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(TEST_STREAM);
        self.sample_from(&mut rng, n)
    }

    fn sample_from(&self, rng: &mut ChaCha8Rng, n: usize) -> Result<LabeledDataset<f64>> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let r = self.radius();
        let mut points = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.random_range(0..self.k * self.k);
            let (u, v) = loop {
                let u: f64 = rng.random_range(-1.0..=1.0);
                let v: f64 = rng.random_range(-1.0..=1.0);
                if u * u + v * v <= 1.0 {
                    break (u, v);
                }
            };
            let center = self.center(c);
            let mut x = Vec::with_capacity(self.d);
            x.push(center[0] + r * u);
            x.push(center[1] + r * v);
            for _ in 2..self.d {
                x.push(rng.random_range(-0.5..=0.5));
            }
            points.push(x);
            labels.push(self.classes[c]);
        }
        LabeledDataset::new(points, labels)
    }
}

/// Which projections the interclass distance searches over.
#[derive(Debug, Clone, PartialEq)]
pub enum InterclassStrategy {
    /// `r = d`: the identity projection is optimal.
    ExactFull,
    /// A supplied orthonormal `r`-frame in `R^d`.
    KnownPlane(Vec<Vec<f64>>),
    /// Best of `trials` random orthonormal `r`-frames.
    RandomSearch { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterclassDistance {
    pub value: f64,
    /// `false` when the value is only a lower bound of `Δ_r`.
    pub exact: bool,
}

/// `Δ_r(S_n) = sup_P inf_{y_i ≠ y_i'} ‖P x_i − P x_i'‖₂` over rank-`r`
/// orthogonal projections.
pub fn interclass_distance(
    data: &LabeledDataset<f64>,
    r: usize,
    strategy: &InterclassStrategy,
) -> Result<InterclassDistance> {
    let d = data.dim();
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!("rank r = {r} must lie in [1, {d}]")));
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    match strategy {
        InterclassStrategy::ExactFull => {
            if r != d {
                return Err(Error::InvalidArgument("ExactFull requires r = d".into()));
            }
            Ok(InterclassDistance {
                value: min_interclass(data.points(), data.labels()),
                exact: true,
            })
        }
        InterclassStrategy::KnownPlane(basis) => {
            check_dim(r, basis.len())?;
            check_orthonormal(basis, d)?;
            Ok(InterclassDistance {
                value: projected_min(data, basis),
                exact: r == d,
            })
        }
        InterclassStrategy::RandomSearch { trials, seed } => {
            if *trials == 0 {
                return Err(Error::InvalidArgument("RandomSearch needs trials >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut best = f64::NEG_INFINITY;
            for _ in 0..*trials {
                let frame = random_frame(&mut rng, r, d);
                best = best.max(projected_min(data, &frame));
            }
            Ok(InterclassDistance {
                value: best,
                exact: r == d,
            })
        }
    }
}

fn check_orthonormal(basis: &[Vec<f64>], d: usize) -> Result<()> {
    for (i, u) in basis.iter().enumerate() {
        check_dim(d, u.len())?;
        for (j, v) in basis.iter().enumerate().take(i + 1) {
            let ip: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            if (ip - target).abs() > 1e-9 {
                return Err(Error::InvalidArgument("projection basis is not orthonormal".into()));
            }
        }
    }
    Ok(())
}

fn random_frame(rng: &mut ChaCha8Rng, r: usize, d: usize) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(r);
    while frame.len() < r {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for u in &frame {
            let ip: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= ip * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            frame.push(v);
        }
    }
    frame
}

fn projected_min(data: &LabeledDataset<f64>, basis: &[Vec<f64>]) -> f64 {
    let proj: Vec<Vec<f64>> = data
        .points()
        .iter()
        .map(|x| {
            basis
                .iter()
                .map(|u| u.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    min_interclass(&proj, data.labels())
}

fn min_interclass(points: &[Vec<f64>], labels: &[i8]) -> f64 {
    let mut best = f64::INFINITY;
    for (xi, _) in points.iter().zip(labels).filter(|(_, &y)| y > 0) {
        for (xj, _) in points.iter().zip(labels).filter(|(_, &y)| y < 0) {
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Monte Carlo estimate of `P[y f(x) < 0]` on `n_test` fresh samples; ties
/// `f(x) = 0` count as errors.
pub fn test_error(
    classifier: impl Fn(&[f64]) -> f64,
    spec: &ClusterGridSpec,
    n_test: usize,
    seed: u64,
) -> Result<f64> {
    let test = spec.sample_with_seed(n_test, seed)?;
    let errors = test
        .iter()
        .filter(|(x, y)| f64::from(*y) * classifier(x) <= 0.0)
        .count();
    Ok(errors as f64 / n_test as f64)
}
