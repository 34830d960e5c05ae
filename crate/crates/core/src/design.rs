//! Dense signed feature matrices `z_{i,j} = y_i φ(θ_j, x_i)`.

use crate::datagen::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::features::FeatureModel;
use crate::scalar::{dot, Scalar};

/// Row-major `n × m` matrix of signed features. Row `i` is a data point,
/// column `j` a fixed direction or hidden unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedFeatureMatrix<T> {
    n: usize,
    m: usize,
    data: Vec<T>,
    inf_norm: T,
}

impl<T: Scalar> SignedFeatureMatrix<T> {
    pub fn new(n: usize, m: usize, data: Vec<T>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("feature matrix needs n, m >= 1".into()));
        }
        check_dim(n * m, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature".into()));
        }
        let inf_norm = data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        Ok(Self { n, m, data, inf_norm })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * m);
        for r in rows {
            check_dim(m, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), m, data)
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.m + j]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// `‖z‖_∞ = max |z_{i,j}|`.
    pub fn inf_norm(&self) -> T {
        self.inf_norm
    }

    /// `Z a` into `out` (length n).
    pub fn mul_into(&self, a: &[T], out: &mut [T]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.m)) {
            *o = row.iter().zip(a).fold(T::zero(), |acc, (&z, &v)| acc + z * v);
        }
    }

    pub fn mul(&self, a: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        self.mul_into(a, &mut out);
        out
    }

    /// `Zᵀ p` into `out` (length m).
    pub fn tmul_into(&self, p: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (&pi, row) in p.iter().zip(self.data.chunks_exact(self.m)) {
            if pi == T::zero() {
                continue;
            }
            for (o, &z) in out.iter_mut().zip(row) {
                *o += pi * z;
            }
        }
    }

    pub fn tmul(&self, p: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.m];
        self.tmul_into(p, &mut out);
        out
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            n: self.n,
            m: self.m,
            data: self.data.iter().map(|&v| v * c).collect(),
            inf_norm: self.inf_norm * c.abs(),
        }
    }

    /// Negates row `i` (label flip).
    pub fn with_row_negated(&self, i: usize) -> Self {
        let mut data = self.data.clone();
        for v in &mut data[i * self.m..(i + 1) * self.m] {
            *v = -*v;
        }
        Self { data, ..self.clone() }
    }

    pub fn with_row_appended(&self, row: &[T]) -> Result<Self> {
        check_dim(self.m, row.len())?;
        let mut data = self.data.clone();
        data.extend_from_slice(row);
        Self::new(self.n + 1, self.m, data)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> SignedFeatureMatrix<U> {
        let data: Vec<U> = self.data.iter().map(|&v| f(v)).collect();
        let inf_norm = data.iter().fold(U::zero(), |acc, v| acc.max(v.abs()));
        SignedFeatureMatrix {
            n: self.n,
            m: self.m,
            data,
            inf_norm,
        }
    }
}

/// `z_{i,j} = y_i φ(w_j, x_i)` for arbitrary parameter vectors `w_j`.
pub fn build_signed_features<T: Scalar>(
    data: &LabeledDataset<T>,
    model: &FeatureModel,
    params: &[Vec<T>],
) -> Result<SignedFeatureMatrix<T>> {
    check_dim(model.input_dim, data.dim())?;
    if params.is_empty() {
        return Err(Error::InvalidArgument("need at least one feature column".into()));
    }
    for w in params {
        check_dim(model.param_dim(), w.len())?;
    }
    let (n, m) = (data.len(), params.len());
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        let (x, y) = (data.point(i), data.y(i));
        out.extend(params.iter().map(|w| y * model.eval_unchecked(w, x)));
    }
    SignedFeatureMatrix::new(n, m, out)
}

/// Same as [`build_signed_features`] but requires unit directions `θ_j`.
pub fn build_direction_features<T: Scalar>(
    data: &LabeledDataset<T>,
    model: &FeatureModel,
    directions: &[Vec<T>],
) -> Result<SignedFeatureMatrix<T>> {
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
    if let Some(j) = directions.iter().position(|t| !model.is_unit(t, tol)) {
        return Err(Error::InvalidArgument(format!("direction {j} is not a unit vector")));
    }
    build_signed_features(data, model, directions)
}

/// Output-layer features `z_{i,j} = y_i σ(c_j·x_i + b_j)` with ReLU `σ` and
/// fixed input weights `(c_j, b_j) ∈ R^{d+1}`.
pub fn hidden_layer_features<T: Scalar>(
    data: &LabeledDataset<T>,
    input_weights: &[Vec<T>],
) -> Result<SignedFeatureMatrix<T>> {
    let d = data.dim();
    if input_weights.is_empty() {
        return Err(Error::InvalidArgument("need at least one hidden unit".into()));
    }
    for w in input_weights {
        check_dim(d + 1, w.len())?;
    }
    let (n, m) = (data.len(), input_weights.len());
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        let (x, y) = (data.point(i), data.y(i));
        out.extend(
            input_weights
                .iter()
                .map(|w| y * (dot(&w[..d], x) + w[d]).max(T::zero())),
        );
    }
    SignedFeatureMatrix::new(n, m, out)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point_single_direction() {
        let model = FeatureModel::relu(1);
        let theta = vec![0.6f64, 0.0, 0.8];
        let x = 0.5 / (0.6 * 0.8);
        let data = LabeledDataset::new(vec![vec![x]], vec![1]).unwrap();
        let z = build_direction_features(&data, &model, &[theta]).unwrap();
        assert_eq!(z.rows(), 1);
        assert!((z.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flipping_a_label_negates_its_row() {
        let model = FeatureModel::relu(2);
        let data = LabeledDataset::new(
            vec![vec![0.1, 0.2], vec![-0.3, 0.4], vec![0.5, -0.6]],
            vec![1, -1, 1],
        )
        .unwrap();
        let params = vec![vec![0.5, -0.5, 0.2, 1.0], vec![-0.1, 0.3, 0.4, -2.0]];
        let z = build_signed_features(&data, &model, &params).unwrap();
        let zf = build_signed_features(&data.with_label_flipped(1), &model, &params).unwrap();
        assert_eq!(zf, z.with_row_negated(1));
    }

    #[test]
    fn matches_elementwise_feature_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = FeatureModel::relu(2);
        let points: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels = (0..7).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let data = LabeledDataset::new(points, labels).unwrap();
        let dirs: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = dot(&v, &v).sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let z = build_direction_features(&data, &model, &dirs).unwrap();
        for i in 0..7 {
            for j in 0..5 {
                let phi = model.eval(&dirs[j], data.point(i)).unwrap();
                assert_eq!(z.get(i, j), data.y(i) * phi);
            }
        }
        assert!(build_direction_features(&data, &model, &[vec![1.0, 1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn hidden_features_are_relu_outputs() {
        let data = LabeledDataset::new(vec![vec![1.0, 2.0]], vec![-1]).unwrap();
        let z = hidden_layer_features(&data, &[vec![1.0, 1.0, -1.0], vec![-1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(z.row(0), &[-2.0, 0.0]);
    }

    #[test]
    fn inf_norm_and_products() {
        let z = SignedFeatureMatrix::from_rows(&[vec![1.0, -3.0], vec![2.0, 0.5]]).unwrap();
        assert_eq!(z.inf_norm(), 3.0);
        assert_eq!(z.mul(&[1.0, 1.0]), vec![-2.0, 2.5]);
        assert_eq!(z.tmul(&[1.0, 2.0]), vec![5.0, -2.0]);
        assert!(SignedFeatureMatrix::<f64>::from_rows(&[]).is_err());
    }
}
