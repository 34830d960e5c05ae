//! Sweep protocols on the cluster-grid benchmark: test error against `n` or
//! `d` for two-layer versus output-layer training, final F₁-margin against
//! the width `m`, and the large-initialization (lazy) run.
//!
//! Every (sweep value, replicate) pair is an isolated deterministic job; jobs
//! run on the current rayon pool and results come back in sweep order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{test_error, ClusterGridSpec, LabeledDataset};
use crate::design::hidden_layer_features;
use crate::error::{Error, Result};
use crate::features::{ActivationKind, FeatureModel, NeuronCloud};
use crate::scalar::dot;
use crate::trainer::{
    default_two_layer_step, init_cloud, run_output_layer, train_two_layer_from, InitScheme, Mode, StepRule,
    TrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FigureKind {
    TestVsN,
    TestVsD,
    MarginVsM,
    Lazy,
}

impl FigureKind {
    pub fn name(self) -> &'static str {
        match self {
            FigureKind::TestVsN => "test_vs_n",
            FigureKind::TestVsD => "test_vs_d",
            FigureKind::MarginVsM => "margin_vs_m",
            FigureKind::Lazy => "lazy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::TestVsN, Self::TestVsD, Self::MarginVsM, Self::Lazy]
            .into_iter()
            .find(|k| k.name() == s.replace('-', "_"))
    }

    /// Name of the swept variable.
    pub fn variable(self) -> &'static str {
        match self {
            FigureKind::TestVsN => "n",
            FigureKind::TestVsD => "d",
            FigureKind::MarginVsM => "m",
            FigureKind::Lazy => "sigma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub values: Vec<f64>,
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub width: usize,
    pub steps: usize,
    pub replicates: usize,
    pub seed: u64,
    pub n_test: usize,
    pub activation: ActivationKind,
}

impl FigureSpec {
    /// Desk-scale defaults.
    pub fn desk(kind: FigureKind) -> Self {
        let base = Self {
            kind,
            values: Vec::new(),
            k: 3,
            d: 5,
            n: 64,
            width: 200,
            steps: 10_000,
            replicates: 5,
            seed: 0,
            n_test: 2000,
            activation: ActivationKind::Relu,
        };
        match kind {
            FigureKind::TestVsN => Self {
                values: vec![32.0, 64.0, 128.0, 256.0],
                ..base
            },
            FigureKind::TestVsD => Self {
                values: vec![2.0, 5.0, 10.0],
                n: 256,
                ..base
            },
            FigureKind::MarginVsM => Self {
                values: vec![50.0, 200.0, 800.0],
                replicates: 10,
                ..base
            },
            FigureKind::Lazy => Self {
                values: vec![40.0],
                width: 100,
                steps: 20_000,
                ..base
            },
        }
    }

    /// Full-scale settings: `d = 15`, `n` up to 1024, `m = 1000`, 20
    /// replicates (30 for the margin sweep).
    pub fn full_scale(kind: FigureKind) -> Self {
        let base = Self {
            d: 15,
            width: 1000,
            replicates: 20,
            steps: 20_000,
            n_test: 10_000,
            ..Self::desk(kind)
        };
        match kind {
            FigureKind::TestVsN => Self {
                values: vec![16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0],
                ..base
            },
            FigureKind::TestVsD => Self {
                values: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
                n: 256,
                ..base
            },
            FigureKind::MarginVsM => Self {
                values: vec![10.0, 30.0, 100.0, 300.0, 1000.0],
                replicates: 30,
                ..base
            },
            FigureKind::Lazy => Self {
                values: vec![40.0],
                steps: 100_000,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidArgument(s.into()));
        if self.values.is_empty() {
            return bad("sweep has no values");
        }
        if self.replicates == 0 || self.steps == 0 || self.n_test == 0 {
            return bad("replicates, steps and n_test must be >= 1");
        }
        if self.k == 0 || self.d < 2 || self.n == 0 || self.width == 0 {
            return bad("need k >= 1, d >= 2, n >= 1, m >= 1");
        }
        for &v in &self.values {
            let ok = match self.kind {
                FigureKind::Lazy => v > 0.0 && v.is_finite(),
                FigureKind::TestVsD => v >= 2.0 && v.fract() == 0.0,
                _ => v >= 1.0 && v.fract() == 0.0,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!("invalid sweep value {v} for {}", self.kind.name())));
            }
        }
        Ok(())
    }
}

/// One line of the long-format output `sweep_value,replicate,metric,value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sweep_value: f64,
    pub replicate: usize,
    pub metric: String,
    pub value: f64,
}

pub const FIGURE_HEADER: &str = "sweep_value,replicate,metric,value";

pub fn write_rows<W: std::io::Write>(rows: &[MetricRow], mut w: W) -> Result<()> {
    writeln!(w, "{FIGURE_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{:.16e}", r.sweep_value, r.replicate, r.metric, r.value)?;
    }
    Ok(())
}

pub fn read_rows<R: std::io::Read>(reader: R) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != FIGURE_HEADER {
        return Err(Error::Parse(format!("unexpected header {:?}", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|_| Error::Parse(format!("bad number {:?}", &rec[i])))
        };
        rows.push(MetricRow {
            sweep_value: num(0)?,
            replicate: rec[1].trim().parse().map_err(|_| Error::Parse(format!("bad replicate {:?}", &rec[1])))?,
            metric: rec[2].trim().to_owned(),
            value: num(3)?,
        });
    }
    Ok(rows)
}

/// Per-replicate seeds: the dataset (and its cluster classes) depends only on
/// the replicate, so sweep points are paired.
fn data_seed(base: u64, replicate: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(replicate as u64)
}

fn init_seed(base: u64, replicate: usize, value: f64) -> u64 {
    data_seed(base, replicate) ^ value.to_bits().rotate_left(17) ^ 0xA5A5_5A5A
}

/// Runs the full sweep. Failed jobs (e.g. overflow) are reported as a
/// `failed` metric and the sweep continues.
pub fn run_figure(spec: &FigureSpec) -> Result<Vec<MetricRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.replicates).map(move |r| (v, r)))
        .collect();
    let results: Vec<Vec<MetricRow>> = jobs
        .par_iter()
        .map(|&(v, r)| {
            let metrics = run_job(spec, v, r).unwrap_or_else(|_| vec![("failed".into(), 1.0)]);
            metrics
                .into_iter()
                .map(|(metric, value)| MetricRow {
                    sweep_value: v,
                    replicate: r,
                    metric,
                    value,
                })
                .collect()
        })
        .collect();
    Ok(results.into_iter().flatten().collect())
}

/// Metrics of a single (sweep value, replicate) job.
pub fn run_job(spec: &FigureSpec, value: f64, replicate: usize) -> Result<Vec<(String, f64)>> {
    let (mut d, mut n, mut m) = (spec.d, spec.n, spec.width);
    match spec.kind {
        FigureKind::TestVsN => n = value as usize,
        FigureKind::TestVsD => d = value as usize,
        FigureKind::MarginVsM => m = value as usize,
        FigureKind::Lazy => {}
    }
    let grid = ClusterGridSpec::new(spec.k, d, data_seed(spec.seed, replicate))?;
    let data = grid.sample(n)?;
    let model = FeatureModel::new(spec.activation, d)?;
    let seed = init_seed(spec.seed, replicate, value);
    let test_seed = data_seed(spec.seed, replicate) ^ 0x5EED;

    let mut out = Vec::new();
    match spec.kind {
        FigureKind::TestVsN | FigureKind::TestVsD => {
            let init = init_cloud(InitScheme::BalancedSphere, &model, m, seed)?;
            let both = TrainConfig {
                seed,
                record_every: spec.steps,
                ..TrainConfig::new(Mode::TwoLayer, spec.steps)
            };
            let (cloud, traj) = train_two_layer_from(&data, init.clone(), &both)?;
            out.push(("test_error_both".into(), test_error(|x| cloud.predict(x).unwrap_or(0.0), &grid, spec.n_test, test_seed)?));
            out.push(("f1_margin_both".into(), traj.last().norm_margin));

            let (classifier, margin) = train_random_features(&data, &init, spec.steps)?;
            out.push(("test_error_output".into(), test_error(&classifier, &grid, spec.n_test, test_seed)?));
            out.push(("margin_output".into(), margin));
        }
        FigureKind::MarginVsM => {
            let cfg = TrainConfig {
                seed,
                record_every: spec.steps,
                ..TrainConfig::new(Mode::TwoLayer, spec.steps)
            };
            let init = init_cloud(InitScheme::BalancedSphere, &model, m, seed)?;
            let (cloud, traj) = train_two_layer_from(&data, init, &cfg)?;
            out.push(("f1_margin".into(), traj.last().norm_margin));
            out.push(("best_f1_margin".into(), traj.best_margin()));
            out.push(("test_error".into(), test_error(|x| cloud.predict(x).unwrap_or(0.0), &grid, spec.n_test, test_seed)?));
        }
        FigureKind::Lazy => {
            let sigma = value;
            let (cloud, early, late, margin) = train_lazy(&data, &model, m, sigma, spec.steps, seed)?;
            out.push(("mass_early".into(), early));
            out.push(("mass_late".into(), late));
            out.push(("mass_growth".into(), late / early));
            out.push(("f1_margin".into(), margin));
            out.push(("test_error".into(), test_error(|x| cloud.predict(x).unwrap_or(0.0), &grid, spec.n_test, test_seed)?));
        }
    }
    Ok(out)
}

/// Large-initialization run: `Gaussian(σ)` weights, a first half of the
/// steps at `η/σ` and a second half at the default constant step `η`.
/// Returns the final cloud, the projected mass after the first step and at
/// the end, and the final F₁-margin.
pub fn train_lazy(
    data: &LabeledDataset<f64>,
    model: &FeatureModel,
    width: usize,
    sigma: f64,
    steps: usize,
    seed: u64,
) -> Result<(NeuronCloud<f64>, f64, f64, f64)> {
    let eta = default_two_layer_step(data);
    let warm = (steps / 2).max(1);
    let cfg = TrainConfig {
        seed,
        init: InitScheme::Gaussian(sigma),
        step_rule: StepRule::Constant(eta / sigma),
        record_every: warm,
        ..TrainConfig::new(Mode::TwoLayer, warm)
    };
    let init = init_cloud(cfg.init, model, width, seed)?;
    let (cloud, first) = train_two_layer_from(data, init, &cfg)?;
    let early = first.records.first().expect("recorded").beta;
    let rest = steps.saturating_sub(warm).max(1);
    let cfg = TrainConfig {
        step_rule: StepRule::Constant(eta),
        steps: rest,
        record_every: rest,
        ..cfg
    };
    let (cloud, second) = train_two_layer_from(data, cloud, &cfg)?;
    let last = second.last();
    Ok((cloud, early, last.beta, last.norm_margin))
}

/// Trains only the output layer on top of the (frozen) input weights of
/// `init`. Returns the classifier and its final normalized margin.
pub fn train_random_features(
    data: &LabeledDataset<f64>,
    init: &NeuronCloud<f64>,
    steps: usize,
) -> Result<(impl Fn(&[f64]) -> f64, f64)> {
    let d = data.dim();
    let inputs: Vec<Vec<f64>> = init.neurons().map(|w| w[..=d].to_vec()).collect();
    let z = hidden_layer_features(data, &inputs)?;
    let cfg = TrainConfig {
        record_every: steps,
        ..TrainConfig::new(Mode::OutputLayer, steps)
    };
    let traj = run_output_layer(&z, &cfg)?;
    let margin = traj.last().norm_margin;
    let a = traj.final_iterate;
    let classifier = move |x: &[f64]| {
        inputs
            .iter()
            .zip(&a)
            .map(|(w, &aj)| aj * (dot(&w[..d], x) + w[d]).max(0.0))
            .sum::<f64>()
    };
    Ok((classifier, margin))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sweep_value: f64,
    pub metric: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median and quartiles per (metric, sweep value), in order of first
/// appearance of the metric and increasing sweep value.
pub fn summarize(rows: &[MetricRow]) -> Vec<Summary> {
    let mut metrics: Vec<&str> = Vec::new();
    for r in rows {
        if !metrics.contains(&r.metric.as_str()) {
            metrics.push(&r.metric);
        }
    }
    let mut out = Vec::new();
    for metric in metrics {
        let mut values: Vec<f64> = rows.iter().filter(|r| r.metric == metric).map(|r| r.sweep_value).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for v in values {
            let mut xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.metric == metric && r.sweep_value == v && r.value.is_finite())
                .map(|r| r.value)
                .collect();
            if xs.is_empty() {
                continue;
            }
            xs.sort_by(f64::total_cmp);
            out.push(Summary {
                sweep_value: v,
                metric: metric.to_owned(),
                median: quantile(&xs, 0.5),
                q1: quantile(&xs, 0.25),
                q3: quantile(&xs, 0.75),
                count: xs.len(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [FigureKind::TestVsN, FigureKind::TestVsD, FigureKind::MarginVsM, FigureKind::Lazy] {
            assert_eq!(FigureKind::parse(k.name()), Some(k));
        }
        assert_eq!(FigureKind::parse("margin-vs-m"), Some(FigureKind::MarginVsM));
        assert_eq!(FigureKind::parse("nope"), None);
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            MetricRow { sweep_value: 50.0, replicate: 0, metric: "f1_margin".into(), value: 0.125 },
            MetricRow { sweep_value: 200.0, replicate: 1, metric: "f1_margin".into(), value: -3e-7 },
        ];
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        assert_eq!(read_rows(&buf[..]).unwrap(), rows);
        assert!(read_rows(&b"a,b\n1,2\n"[..]).is_err());
    }

    #[test]
    fn summary_groups_by_metric_and_value() {
        let mk = |v: f64, r: usize, m: &str, x: f64| MetricRow { sweep_value: v, replicate: r, metric: m.into(), value: x };
        let rows = vec![mk(2.0, 0, "a", 1.0), mk(1.0, 0, "a", 5.0), mk(2.0, 1, "a", 3.0), mk(1.0, 0, "b", 0.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].sweep_value, s[0].median), (1.0, 5.0));
        assert_eq!((s[1].sweep_value, s[1].median, s[1].count), (2.0, 2.0, 2));
        assert_eq!(s[2].metric, "b");
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let spec = FigureSpec {
            values: vec![8.0, 16.0],
            replicates: 2,
            steps: 30,
            n: 16,
            n_test: 50,
            ..FigureSpec::desk(FigureKind::MarginVsM)
        };
        let a = run_figure(&spec).unwrap();
        let b = run_figure(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 2 * 3);
        assert_eq!(a[0].sweep_value, 8.0);
    }

    #[test]
    fn validation() {
        let mut spec = FigureSpec::desk(FigureKind::TestVsD);
        spec.values = vec![1.0];
        assert!(spec.validate().is_err());
        spec.values = vec![2.5];
        assert!(spec.validate().is_err());
        let mut spec = FigureSpec::desk(FigureKind::Lazy);
        spec.values = vec![-1.0];
        assert!(spec.validate().is_err());
    }
}
