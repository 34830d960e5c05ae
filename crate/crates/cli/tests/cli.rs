use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use wide2nn::ClusterGridSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wide2nn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for name in names {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn gamma1_of_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let z = dir.path().join("z.csv");
    fs::write(&z, "c0,c1\n2,0\n0,1\n").unwrap();
    let v = ok_json(&["solve", "gamma1", "--z", p(&z)]);
    assert!((v["value"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!(v["gap"].as_f64().unwrap() < 1e-12);

    let v = ok_json(&["solve", "gamma2", "--z", p(&z)]);
    // ball of radius 1/sqrt(m): sqrt(1/2) * 2/sqrt(5)
    assert!((v["value"].as_f64().unwrap() - (0.4f64).sqrt()).abs() < 1e-9);
}

#[test]
fn bound_example() {
    let v = ok_json(&["solve", "bound", "--gamma", "0.5", "--n", "10000", "--C", "2", "--delta", "0.05"]);
    let b = v["value"].as_f64().unwrap();
    assert!((b - 0.1040).abs() < 5e-4, "{b}");
    assert_eq!(run(&["solve", "bound", "--gamma", "0.5", "--n", "10", "--delta", "0.05"]).status.code(), Some(2));
}

#[test]
fn delta_at_full_rank_is_min_pairwise_distance() {
    let data = ClusterGridSpec::new(3, 2, 4).unwrap().sample(30).unwrap();
    let mut best = f64::INFINITY;
    for i in 0..data.len() {
        for j in 0..data.len() {
            if data.labels()[i] != data.labels()[j] {
                let d: f64 = data.point(i).iter().zip(data.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                best = best.min(d.sqrt());
            }
        }
    }
    let v = ok_json(&["solve", "delta", "--r", "2", "--k", "3", "--d", "2", "--n", "30", "--seed", "4"]);
    assert_eq!(v["exact"], true);
    assert!((v["value"].as_f64().unwrap() - best).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    data.save(&csv).unwrap();
    let v = ok_json(&["solve", "delta", "--r", "2", "--data", p(&csv)]);
    assert!((v["value"].as_f64().unwrap() - best).abs() < 1e-12);
}

#[test]
fn reference_is_certified() {
    let v = ok_json(&["solve", "reference", "--grid", "100", "--n", "12"]);
    let value = v["value"].as_f64().unwrap();
    assert!(value > 0.0);
    assert_eq!(v["directions"], 200);
    assert!(v["certificate"]["gap"].as_f64().unwrap() < 1e-9);
}

#[test]
fn output_layer_reaches_the_dual_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = run(&[
        "train", "--mode", "output-layer", "--m", "50", "--n", "8", "--steps", "100000", "--out", p(&out),
    ]);
    assert!(status.status.success());
    let s = read_json(&out.join("summary.json"));
    let rep = &s["replicates"][0];
    assert!(rep["relative_gap"].as_f64().unwrap() <= 0.05, "{rep}");
    assert!(out.join("replicate_000/certificate.json").exists());
}

#[test]
fn train_is_deterministic_and_reruns_from_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = ["train", "--steps", "500", "--m", "40", "--n", "24", "--replicates", "2", "--n-test", "200"];
    for out in [&a, &b] {
        let mut full = args.to_vec();
        full.extend(["--out", p(out)]);
        assert!(run(&full).status.success());
    }
    let cfg = a.join("config.txt");
    assert!(run(&["train", "--config", p(&cfg), "--out", p(&c)]).status.success());
    for r in ["replicate_000", "replicate_001"] {
        let files = ["data.csv", "trajectory.csv", "weights.csv"];
        same_files(&a.join(r), &b.join(r), &files);
        same_files(&a.join(r), &c.join(r), &files);
    }
    same_files(&a, &c, &["config.txt", "summary.json"]);
}

#[test]
fn two_layer_summary_reports_balance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let st = run(&[
        "train", "--init", "balanced-sphere", "--steps", "200", "--m", "20", "--n", "16", "--out", p(&out),
    ]);
    assert!(st.status.success());
    let rep = &read_json(&out.join("summary.json"))["replicates"][0];
    assert!(rep["balance_drift"].as_f64().unwrap().is_finite());
    assert!(rep["initial_imbalance"].as_f64().unwrap() < 1e-12);
    for key in ["test_error", "final_margin", "beta"] {
        assert!(rep[key].is_number(), "{key}");
    }
}

#[test]
fn lazy_figure_grows_mass_and_svg_regenerates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lazy");
    let st = run(&["--jobs", "2", "figure", "lazy", "--replicates", "2", "--out", p(&out)]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));

    let csv = fs::read_to_string(out.join("lazy.csv")).unwrap();
    assert!(csv.starts_with("sweep_value,replicate,metric,value\n"));
    let growth: Vec<f64> = csv
        .lines()
        .filter(|l| l.split(',').nth(2) == Some("mass_growth"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(growth.len(), 2);
    assert!(growth.iter().all(|&g| g >= 10.0), "{growth:?}");

    let svg = out.join("lazy.svg");
    let original = fs::read(&svg).unwrap();
    fs::remove_file(&svg).unwrap();
    let st = run(&["figure", "--config", p(&out.join("config.txt")), "--from-csv", p(&out.join("lazy.csv"))]);
    assert!(st.status.success());
    assert_eq!(fs::read(&svg).unwrap(), original);

    let again = dir.path().join("again");
    let st = run(&["--jobs", "1", "figure", "--config", p(&out.join("config.txt")), "--out", p(&again)]);
    assert!(st.status.success());
    same_files(&out, &again, &["lazy.csv", "lazy.svg", "config.txt"]);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "stpes = 10\n").unwrap();
    let out = dir.path().join("x");
    assert_eq!(run(&["train", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(2));
    fs::write(&cfg, "steps 10\n").unwrap();
    assert_eq!(run(&["train", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(run(&["train", "--mode", "sideways", "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(
        run(&["train", "--mode", "output-layer", "--activation", "squared-relu", "--out", p(&out)]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["figure", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "delta", "--r", "2", "--strategy", "psychic"]).status.code(), Some(2));
    assert_eq!(run(&["--jobs", "0", "solve", "bound", "--gamma", "1", "--n", "1", "--C", "1", "--delta", "0.1"]).status.code(), Some(2));
    assert!(!out.join("summary.json").exists());
}
