use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde_json::{json, Value};

use wide2nn::margins::reference_directions;
use wide2nn::trainer::{
    balance_drift, build_direction_features, hidden_layer_features, init_cloud, train_fixed_directions,
    train_output_layer, train_two_layer_from,
};
use wide2nn::{
    gamma1_lp, gamma2_dual, test_error, ActivationKind, ClusterGridSpec, FeatureModel, InitScheme, Mode, TrainConfig,
    Traj,
};

use crate::config::{parse_activation, parse_init, parse_loss, parse_mode, parse_step_rule, Settings};
use crate::error::{config_err, CliResult, Failure};

pub const DEFAULTS: [(&str, &str); 14] = [
    ("mode", "two-layer"),
    ("activation", "relu"),
    ("loss", "exponential"),
    ("k", "3"),
    ("d", "5"),
    ("n", "64"),
    ("m", "200"),
    ("seed", "0"),
    ("steps", "10000"),
    ("step-size", "schedule"),
    ("init", "default"),
    ("replicates", "1"),
    ("record-every", "1000"),
    ("n-test", "2000"),
];

#[derive(Debug, Clone)]
pub struct TrainPlan {
    pub cfg: TrainConfig,
    pub activation: ActivationKind,
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub n_test: usize,
}

impl TrainPlan {
    pub fn from_settings(s: &Settings) -> CliResult<Self> {
        let mode = parse_mode(s.raw("mode"))?;
        let cfg = TrainConfig {
            mode,
            loss: parse_loss(s.raw("loss"))?,
            steps: s.get("steps")?,
            step_rule: parse_step_rule(s.raw("step-size"))?,
            init: parse_init(s.raw("init"), mode)?,
            seed: s.get("seed")?,
            record_every: s.get("record-every")?,
        };
        cfg.validate()?;
        let plan = Self {
            cfg,
            activation: parse_activation(s.raw("activation"))?,
            k: s.get("k")?,
            d: s.get("d")?,
            n: s.get("n")?,
            m: s.get("m")?,
            replicates: s.get("replicates")?,
            n_test: s.get("n-test")?,
        };
        if plan.k == 0 || plan.d < 2 || plan.n == 0 || plan.m == 0 || plan.replicates == 0 || plan.n_test == 0 {
            return config_err("k, n, m, replicates and n-test must be >= 1 and d >= 2");
        }
        if mode == Mode::OutputLayer && plan.activation != ActivationKind::Relu {
            return config_err("output-layer training uses ReLU hidden units; set activation = relu");
        }
        Ok(plan)
    }

    fn data_seed(&self, r: usize) -> u64 {
        self.cfg.seed.wrapping_add(r as u64)
    }

    fn init_seed(&self, r: usize) -> u64 {
        self.data_seed(r) ^ 0x9E37_79B9_7F4A_7C15
    }
}

fn write_trajectory(traj: &Traj, path: &Path) -> CliResult<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    traj.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

fn write_json(value: &Value, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).context("serializing json")?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// One replicate; writes its files into `dir` and returns its summary entry.
fn run_replicate(plan: &TrainPlan, r: usize, dir: &Path) -> CliResult<Value> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let grid = ClusterGridSpec::new(plan.k, plan.d, plan.data_seed(r))?;
    let data = grid.sample(plan.n)?;
    data.save(dir.join("data.csv"))?;
    let model = FeatureModel::new(plan.activation, plan.d)?;
    let seed = plan.init_seed(r);
    let cfg = TrainConfig { seed, ..plan.cfg };
    let test_seed = plan.data_seed(r) ^ 0x5EED;
    let d = plan.d;

    let mut entry = json!({
        "replicate": r,
        "status": "ok",
        "data_seed": plan.data_seed(r),
        "init_seed": seed,
    });
    let traj = match cfg.mode {
        Mode::TwoLayer => {
            let init = init_cloud(cfg.init, &model, plan.m, seed)?;
            let (cloud, traj) = train_two_layer_from(&data, init.clone(), &cfg)?;
            let err = test_error(|x| cloud.predict(x).unwrap_or(0.0), &grid, plan.n_test, test_seed)?;
            entry["test_error"] = json!(err);
            entry["balance_drift"] = json!(balance_drift(&init, &cloud));
            entry["initial_imbalance"] = json!(init.balance_drift());
            let rows: String = cloud
                .neurons()
                .map(|w| w.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",") + "\n")
                .collect();
            fs::write(dir.join("weights.csv"), rows).context("writing weights")?;
            traj
        }
        Mode::FixedDirections => {
            let mut dirs: Vec<Vec<f64>> = reference_directions(&model, plan.m.div_ceil(2), seed);
            dirs.truncate(plan.m);
            let z = build_direction_features(&data, &model, &dirs)?;
            let traj = train_fixed_directions(&z, &cfg)?;
            let a = traj.final_iterate.clone();
            let err = test_error(
                |x| dirs.iter().zip(&a).map(|(t, &aj)| aj * model.eval_unchecked(t, x)).sum(),
                &grid,
                plan.n_test,
                test_seed,
            )?;
            entry["test_error"] = json!(err);
            let cert = gamma1_lp(&z)?;
            attach_solver(&mut entry, &traj, cert.value(), cert.gap);
            write_json(&cert.to_json(), &dir.join("certificate.json"))?;
            traj
        }
        Mode::OutputLayer => {
            let hidden = init_cloud(InitScheme::BalancedSphere, &FeatureModel::relu(d), plan.m, seed)?;
            let inputs: Vec<Vec<f64>> = hidden.neurons().map(|w| w[..=d].to_vec()).collect();
            let z = hidden_layer_features(&data, &inputs)?;
            let traj = train_output_layer(&z, &cfg)?;
            let a = traj.final_iterate.clone();
            let err = test_error(
                |x| {
                    inputs
                        .iter()
                        .zip(&a)
                        .map(|(w, &aj)| aj * (w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]).max(0.0))
                        .sum()
                },
                &grid,
                plan.n_test,
                test_seed,
            )?;
            entry["test_error"] = json!(err);
            let cert = gamma2_dual(&z)?;
            attach_solver(&mut entry, &traj, cert.value(), cert.gap);
            write_json(&cert.to_json(), &dir.join("certificate.json"))?;
            traj
        }
    };
    write_trajectory(&traj, &dir.join("trajectory.csv"))?;
    let last = traj.last();
    entry["steps"] = json!(last.t);
    entry["final_margin"] = json!(last.norm_margin);
    entry["best_margin"] = json!(traj.best_margin());
    entry["beta"] = json!(last.beta);
    entry["guarantee"] = serde_json::to_value(traj.guarantee).context("serializing guarantee")?;
    Ok(entry)
}

fn attach_solver(entry: &mut Value, traj: &Traj, value: f64, gap: f64) {
    entry["solver_value"] = json!(value);
    entry["solver_gap"] = json!(gap);
    if value > 0.0 {
        entry["relative_gap"] = json!((value - traj.best_margin()) / value);
    }
}

pub fn replicate_dir(out: &Path, r: usize) -> PathBuf {
    out.join(format!("replicate_{r:03}"))
}

/// Runs all replicates and writes `config.txt`, per-replicate files and
/// `summary.json`. Failed replicates are recorded and the others still run.
pub fn cmd_train(settings: &Settings, out: &Path) -> CliResult<()> {
    let plan = TrainPlan::from_settings(settings)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.txt"), settings.render()).context("writing config")?;

    let entries: Vec<Value> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| {
            run_replicate(&plan, r, &replicate_dir(out, r)).unwrap_or_else(|e| {
                json!({ "replicate": r, "status": "failed", "error": e.to_string() })
            })
        })
        .collect();
    let failed = entries.iter().filter(|e| e["status"] == "failed").count();
    for e in &entries {
        match e["status"].as_str() {
            Some("ok") => eprintln!(
                "replicate {}: final margin {:.6}, best {:.6}, test error {:.4}",
                e["replicate"],
                e["final_margin"].as_f64().unwrap_or(f64::NAN),
                e["best_margin"].as_f64().unwrap_or(f64::NAN),
                e["test_error"].as_f64().unwrap_or(f64::NAN)
            ),
            _ => eprintln!("replicate {} failed: {}", e["replicate"], e["error"]),
        }
    }
    let summary = json!({
        "mode": settings.raw("mode"),
        "replicates": entries,
        "failed": failed,
    });
    write_json(&summary, &out.join("summary.json"))?;
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} of {} replicate(s) failed", plan.replicates)));
    }
    Ok(())
}
