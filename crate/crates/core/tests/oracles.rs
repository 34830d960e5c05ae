//! Derived values checked against independent brute-force computations.

use wide2nn::datagen::{interclass_distance, test_error, ClusterGridSpec, InterclassStrategy};
use wide2nn::features::{Atom, SphereMeasure};
use wide2nn::margins::{f1_margin, gamma1_lp, gamma1_reference, reference_directions};
use wide2nn::trainer::build_direction_features;
use wide2nn::{Dataset, FeatureMatrix, FeatureModel};

#[test]
fn diagonal_lp_against_fine_grid() {
    let z = FeatureMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let res = 100_000;
    let grid = (0..=res)
        .map(|i| {
            let a = i as f64 / res as f64;
            (2.0 * a).min(1.0 - a)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let c = gamma1_lp(&z).unwrap();
    assert!((c.value() - 2.0 / 3.0).abs() < 1e-12);
    assert!((c.value() - grid).abs() <= 1e-5);
    assert!((c.primal[0] - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn f1_margin_of_the_lp_measure_is_the_lp_value() {
    let data = ClusterGridSpec::new(3, 2, 4).unwrap().sample(30).unwrap();
    let model = FeatureModel::relu(2);
    let dirs: Vec<Vec<f64>> = reference_directions(&model, 200, 5);
    let z = build_direction_features(&data, &model, &dirs).unwrap();
    let c = gamma1_lp(&z).unwrap();
    let atoms = dirs
        .iter()
        .zip(&c.primal)
        .filter(|(_, &a)| a > 0.0)
        .map(|(d, &a)| Atom {
            point: d.clone(),
            mass: a,
        })
        .collect();
    let measure = SphereMeasure::new(&model, atoms).unwrap();
    let f1 = f1_margin(&measure, &data, &model).unwrap();
    assert!((f1 - c.value()).abs() <= 1e-9, "{f1} vs {}", c.value());
}

#[test]
fn reference_margin_grows_with_the_grid() {
    let data = ClusterGridSpec::new(3, 2, 9).unwrap().sample(20).unwrap();
    let model = FeatureModel::relu(2);
    let sizes = [100, 400, 1600];
    let mut per_size = vec![Vec::new(); sizes.len()];
    for seed in 0..5 {
        let values: Vec<f64> = sizes
            .iter()
            .map(|&m| gamma1_reference(&data, &model, m, seed).unwrap().value)
            .collect();
        // the grids are nested, so each LP sees a superset of columns
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{values:?}");
        }
        for (slot, v) in per_size.iter_mut().zip(values) {
            slot.push(v);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let medians: Vec<f64> = per_size.iter_mut().map(median).collect();
    assert!(medians.windows(2).all(|w| w[1] >= w[0]), "{medians:?}");
}

/// Two points `x = ±1` with labels `±1`. For any measure the margin is at
/// most `(f(1) − f(−1))/2 ≤ ½ sup_θ [φ(θ,1) − φ(θ,−1)]`, and two balanced
/// atoms of equal mass attain it, so `γ₁ = 1/(2√2)`.
#[test]
fn one_dimensional_toy_matches_angle_search() {
    let model = FeatureModel::relu(1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let brute = (0..10_000)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 10_000.0;
            let theta = [s * t.cos(), s * t.sin(), s];
            0.5 * (model.eval(&theta, &[1.0]).unwrap() - model.eval(&theta, &[-1.0]).unwrap())
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let exact = 0.5 * s;
    assert!((brute - exact).abs() < 1e-6);
    let data = Dataset::new(vec![vec![1.0], vec![-1.0]], vec![1, -1]).unwrap();
    let reference = gamma1_reference(&data, &model, 4000, 1).unwrap().value;
    assert!(reference <= exact + 1e-9);
    assert!(reference >= exact - 1e-4, "{reference}");
}

#[test]
fn collinear_points_interclass_distance() {
    let data = Dataset::new(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]],
        vec![1, -1, 1, -1],
    )
    .unwrap();
    let brute = (0..10_000)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / 10_000.0;
            let p: Vec<f64> = data.points().iter().map(|x| x[0] * t.cos() + x[1] * t.sin()).collect();
            let mut best = f64::INFINITY;
            for i in 0..4 {
                for j in 0..4 {
                    if data.labels()[i] != data.labels()[j] {
                        best = best.min((p[i] - p[j]).abs());
                    }
                }
            }
            best
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((brute - 1.0).abs() < 1e-12);
    let full = interclass_distance(&data, 2, &InterclassStrategy::ExactFull).unwrap();
    assert_eq!(full.value, 1.0);
    let line = interclass_distance(&data, 1, &InterclassStrategy::KnownPlane(vec![vec![1.0, 0.0]])).unwrap();
    assert_eq!(line.value, 1.0);
    let search = interclass_distance(&data, 1, &InterclassStrategy::RandomSearch { trials: 10_000, seed: 2 }).unwrap();
    assert!(search.value <= 1.0 + 1e-12 && search.value > 0.999, "{}", search.value);
}

#[test]
fn cluster_gap_bounds_the_plane_distance() {
    for seed in 0..20 {
        for k in 2..5 {
            let spec = ClusterGridSpec::new(k, 4, seed).unwrap();
            let data = spec.sample(100).unwrap();
            if !data.has_both_classes() {
                continue;
            }
            let plane = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]];
            let v = interclass_distance(&data, 2, &InterclassStrategy::KnownPlane(plane)).unwrap();
            assert!(v.value >= spec.delta2_lower_bound() - 1e-12, "k={k} seed={seed}");
        }
    }
}

#[test]
fn test_error_is_within_its_standard_error() {
    let spec = ClusterGridSpec::new(3, 3, 21).unwrap();
    let classifier = |x: &[f64]| x[0] + 0.3 * x[1];
    let truth = test_error(classifier, &spec, 400_000, 999).unwrap();
    let n = 10_000;
    let se = (truth * (1.0 - truth) / n as f64).sqrt();
    assert!(truth > 0.05 && truth < 0.95);
    for seed in 0..5 {
        let est = test_error(classifier, &spec, n, seed).unwrap();
        assert!((est - truth).abs() <= 4.0 * se, "seed {seed}: {est} vs {truth}");
    }
}
