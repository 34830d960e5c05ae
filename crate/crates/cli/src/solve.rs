use std::fs;
use std::path::Path;

use anyhow::Context;
use serde_json::{json, Value};

use wide2nn::bounds::sup_norm_from_radius;
use wide2nn::{
    gamma1_lp, gamma1_reference, gamma2_dual, interclass_distance, margin_bound, BoundInputs, ClusterGridSpec,
    Dataset, FeatureMatrix, FeatureModel, InterclassStrategy,
};

use crate::config::parse_activation;
use crate::error::{config_err, CliResult};

/// Reads a dense matrix: one row per line, comma separated. A first line
/// that does not parse as numbers is treated as a header.
pub fn read_matrix(path: &Path) -> CliResult<FeatureMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if rows.is_empty() && no == 0 => continue,
            Err(_) => return config_err(format!("{}:{}: not a numeric row", path.display(), no + 1)),
        }
    }
    Ok(FeatureMatrix::from_rows(&rows)?)
}

/// Where `solve` takes its data from: a CSV file or a generated cluster grid.
#[derive(Debug, Clone)]
pub struct DataSource<'a> {
    pub file: Option<&'a Path>,
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
}

impl DataSource<'_> {
    pub fn load(&self) -> CliResult<(Dataset, Value)> {
        match self.file {
            Some(path) => Ok((Dataset::load(path)?, json!({ "file": path.display().to_string() }))),
            None => {
                let data = ClusterGridSpec::new(self.k, self.d, self.seed)?.sample(self.n)?;
                Ok((data, json!({ "k": self.k, "d": self.d, "n": self.n, "seed": self.seed })))
            }
        }
    }
}

pub fn gamma1(z: &Path) -> CliResult<Value> {
    Ok(gamma1_lp(&read_matrix(z)?)?.to_json())
}

pub fn gamma2(z: &Path) -> CliResult<Value> {
    Ok(gamma2_dual(&read_matrix(z)?)?.to_json())
}

pub fn reference(src: &DataSource, activation: &str, grid: usize, grid_seed: u64) -> CliResult<Value> {
    let (data, origin) = src.load()?;
    let model = FeatureModel::new(parse_activation(activation)?, data.dim())?;
    let r = gamma1_reference(&data, &model, grid, grid_seed)?;
    Ok(json!({
        "value": r.value,
        "grid": grid,
        "grid_seed": grid_seed,
        "directions": r.directions.len(),
        "data": origin,
        "certificate": r.certificate.to_json(),
    }))
}

pub fn delta(src: &DataSource, r: usize, strategy: &str, trials: usize, search_seed: u64) -> CliResult<Value> {
    let (data, origin) = src.load()?;
    let d = data.dim();
    let strat = match strategy {
        "auto" if r == d => InterclassStrategy::ExactFull,
        "auto" | "random" => InterclassStrategy::RandomSearch { trials, seed: search_seed },
        "exact" => InterclassStrategy::ExactFull,
        "plane" => {
            let frame = (0..r)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            InterclassStrategy::KnownPlane(frame)
        }
        _ => return config_err(format!("unknown strategy {strategy:?} (auto, exact, random, plane)")),
    };
    let v = interclass_distance(&data, r, &strat)?;
    Ok(json!({ "value": v.value, "exact": v.exact, "r": r, "strategy": strategy, "data": origin }))
}

#[derive(Debug, Clone, Copy)]
pub struct BoundArgs {
    pub gamma: f64,
    pub n: usize,
    pub sup_norm: Option<f64>,
    pub radius: Option<f64>,
    pub delta: f64,
    pub rademacher: Option<f64>,
}

pub fn bound(a: BoundArgs) -> CliResult<Value> {
    let c = match (a.sup_norm, a.radius) {
        (Some(c), None) => c,
        (None, Some(r)) => sup_norm_from_radius(r),
        (None, None) => return config_err("give --C or --radius"),
        (Some(_), Some(_)) => return config_err("give only one of --C and --radius"),
    };
    let mut inputs = BoundInputs::new(a.gamma, c, a.n, a.delta);
    if let Some(rad) = a.rademacher {
        inputs = inputs.with_rademacher(rad);
    }
    let b = margin_bound(&inputs)?;
    Ok(json!({
        "value": b.value,
        "raw": b.raw,
        "complexity_term": b.complexity_term,
        "margin_term": b.margin_term,
        "confidence_term": b.confidence_term,
        "inputs": inputs,
    }))
}
