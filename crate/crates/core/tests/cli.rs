use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-obs"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_model(dir: &Path) -> std::path::PathBuf {
    let model = dir.join("model.json");
    std::fs::write(&model, r#"{"builtin": "group_testing", "params": {"p1": 0.1, "f": 0.05, "theta": 0.2}}"#).unwrap();
    model
}

#[test]
fn experiment_with_config_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"sizes": [6], "replicas": 8, "seed": 3}"#).unwrap();
    let csv = dir.path().join("res/corr.csv");
    let out = run(&["exp-correlation", "--config", path(&config), "--out", path(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("experiment,statistic,n,k,t,theta,label,estimate,std_error,bound,count\n"));
    assert!(text.contains("correlation_decay,factorization_gap,6,"));
    assert!(dir.path().join("res/corr.manifest.json").exists());
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"sizes": [6], "epsilon": -0.5}"#).unwrap();
    let out = run(&["exp-correlation", "--config", path(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    std::fs::write(&config, r#"{"replcas": 4}"#).unwrap();
    let out = run(&["exp-calibration", "--config", path(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replcas"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["gen-graph", "--n", "5", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(run(&["--help"]).status.success());
    assert_eq!(run(&["--threads", "0", "gen-graph", "--n", "5"]).status.code(), Some(1));
}

#[test]
fn pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = write_model(d);
    let graph = d.join("g.txt");
    let world = d.join("w.json");
    assert!(run(&["gen-graph", "--n", "10", "--seed", "4", "--out", path(&graph)]).status.success());
    assert!(run(&["sample-world", "--graph", path(&graph), "--model", path(&model), "--seed", "5", "--out", path(&world)]).status.success());

    let oracle = run(&["oracle", "--graph", path(&graph), "--model", path(&model), "--world", path(&world)]);
    assert!(oracle.status.success(), "{}", String::from_utf8_lossy(&oracle.stderr));
    let text = String::from_utf8(oracle.stdout).unwrap();
    assert!(text.starts_with("var,symbol,value\n"));
    assert_eq!(text.lines().count(), 1 + 10 * 2);
    for var in 0..10 {
        let s: f64 = text.lines().skip(1 + 2 * var).take(2).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    let bp = |out: &Path| run(&["bp", "--graph", path(&graph), "--model", path(&model), "--seed", "7", "--out", path(out)]);
    let (a, b) = (d.join("a.csv"), d.join("b.csv"));
    assert!(bp(&a).status.success());
    assert!(bp(&b).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn broken_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = write_model(d);
    let missing = d.join("missing.txt");
    let out = run(&["oracle", "--graph", path(&missing), "--model", path(&model)]);
    assert_eq!(out.status.code(), Some(2));
    let graph = d.join("g.txt");
    std::fs::write(&graph, "not a graph\n").unwrap();
    let out = run(&["bp", "--graph", path(&graph), "--model", path(&model)]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn de_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let snap = dir.path().join("pop.csv");
    let out = run(&["de", "--model", path(&model), "--population", "500", "--generations", "4", "--snapshot", path(&snap)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("generation,mean_entropy,error_proxy,ks_to_prev\n"));
    assert_eq!(text.lines().count(), 1 + 5);
    assert_eq!(std::fs::read_to_string(&snap).unwrap().lines().count(), 501);
}

#[test]
fn rerun_reproduces_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"sizes": [8], "replicas": 6, "radii": [1]}"#).unwrap();
    let first = dir.path().join("first.csv");
    let out = run(&["--threads", "2", "exp-bp-vs-exact", "--config", path(&config), "--seed", "11", "--out", path(&first)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let second = dir.path().join("second.csv");
    let manifest = dir.path().join("first.manifest.json");
    assert!(run(&["rerun", "--manifest", path(&manifest), "--out", path(&second)]).status.success());
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}
