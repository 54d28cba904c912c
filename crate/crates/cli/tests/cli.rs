use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn life(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_life"))
        .args(args)
        .env_remove("LIFE_SEED")
        .output()
        .expect("run life")
}

fn ok(args: &[&str]) -> Output {
    let out = life(args);
    assert!(out.status.success(), "life {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn gen(dir: &Path, n: &str, seed: &str) -> PathBuf {
    ok(&["gen-data", "--form", "gam", "--n", n, "--seed", seed, "--out", s(dir)]);
    dir.join("data.csv")
}

fn train(data: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["train", "--data", s(data), "--hidden", "4,4", "--iterations", "10", "--out", s(out)];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn gen_data_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = gen(&tmp.path().join("a"), "200", "1");
    let b = gen(&tmp.path().join("b"), "200", "1");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(header(&a), "x1,x2,x3,x4,x5,x6,y");
    let spec: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("a/data.json")).unwrap()).unwrap();
    assert_eq!(spec["form"], "gam");
    assert_eq!(spec["n"], 200);
    assert!(tmp.path().join("a/config.json").exists());
}

#[test]
fn usage_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let out = life(&["gen-data", "--form", "xyz", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let missing = tmp.path().join("nope.csv");
    let out = life(&["train", "--data", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn train_writes_artifacts() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "600", "2");
    let run = tmp.path().join("run");
    train(&data, &run, &[]);
    for f in ["model.json", "metrics.csv", "trace.csv", "subsets.csv", "config.json"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    assert_eq!(header(&run.join("metrics.csv")), "dataset,seed,model,metric,value,seconds");
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    for metric in ["test_rmse", "test_r2", "train_rmse"] {
        let row = metrics.lines().find(|l| l.split(',').nth(3) == Some(metric)).unwrap();
        let value: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
        assert!(value.is_finite());
    }
    assert_eq!(
        header(&run.join("trace.csv")),
        "iteration,candidates,kept,trained,failed,neurons,coverage,mean_ratio,seconds"
    );
    assert_eq!(header(&run.join("subsets.csv")), "iteration,candidate,ratio,kept");
}

#[test]
fn config_file_reproduces_the_model() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "400", "3");
    let first = tmp.path().join("first");
    train(&data, &first, &["--seed", "9", "--sampling", "random"]);
    let second = tmp.path().join("second");
    ok(&["train", "--config", s(&first.join("config.json")), "--out", s(&second)]);
    let strip = |dir: &Path| {
        let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("model.json")).unwrap()).unwrap();
        m.as_object_mut().unwrap().remove("trace");
        m
    };
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn seed_can_come_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "300", "4");
    let run = tmp.path().join("run");
    let out = Command::new(env!("CARGO_BIN_EXE_life"))
        .args(["train", "--data", s(&data), "--hidden", "3,3", "--iterations", "5", "--out", s(&run)])
        .env("LIFE_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 42);
    assert_eq!(cfg["resolved"]["life"]["seed"], 42);
}

#[test]
fn bootstrap_sampling_and_evaluate() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "400", "5");
    let run = tmp.path().join("run");
    train(&data, &run, &["--sampling", "bootstrap", "--optimizer", "adam"]);
    let eval = tmp.path().join("eval");
    ok(&["evaluate", "--model", s(&run.join("model.json")), "--data", s(&data), "--out", s(&eval)]);
    assert_eq!(header(&eval.join("predictions.csv")), "row,y,prediction");
    assert_eq!(fs::read_to_string(eval.join("predictions.csv")).unwrap().lines().count(), 401);
}

#[test]
fn decompose_single_learner_has_no_diversity() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "300", "6");
    let run = tmp.path().join("run");
    ok(&["train", "--data", s(&data), "--hidden", "4", "--iterations", "10", "--out", s(&run)]);
    let dec = tmp.path().join("dec");
    ok(&["decompose", "--model", s(&run.join("model.json")), "--data", s(&data), "--out", s(&dec)]);
    let text = fs::read_to_string(dec.join("decomposition.csv")).unwrap();
    let mut lines = text.lines();
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    let at = cols.iter().position(|&c| c == "diversity").unwrap();
    for line in lines {
        assert_eq!(line.split(',').nth(at).unwrap().parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn prune_with_tau_one_keeps_everything() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "600", "7");
    let run = tmp.path().join("run");
    train(&data, &run, &["--test-fraction", "0"]);
    let pruned = tmp.path().join("pruned");
    ok(&["prune", "--model", s(&run.join("model.json")), "--data", s(&data), "--tau", "1.0", "--out", s(&pruned)]);
    let learners = fs::read_to_string(pruned.join("learners.csv")).unwrap();
    let cols: Vec<&str> = learners.lines().next().unwrap().split(',').collect();
    let rank = cols.iter().position(|&c| c == "removal_rank").unwrap();
    assert!(learners.lines().skip(1).all(|l| l.split(',').nth(rank) == Some("")));

    let before = tmp.path().join("before");
    let after = tmp.path().join("after");
    ok(&["evaluate", "--model", s(&run.join("model.json")), "--data", s(&data), "--out", s(&before)]);
    ok(&["evaluate", "--model", s(&pruned.join("model.json")), "--data", s(&data), "--out", s(&after)]);
    assert_eq!(
        fs::read(before.join("predictions.csv")).unwrap(),
        fs::read(after.join("predictions.csv")).unwrap()
    );
}

#[test]
fn interpret_writes_documented_tables() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "500", "8");
    let run = tmp.path().join("run");
    train(&data, &run, &[]);
    let out = tmp.path().join("interp");
    ok(&["interpret", "--model", s(&run.join("model.json")), "--data", s(&data), "--out", s(&out)]);
    assert!(header(&out.join("regions.csv")).starts_with("pattern,count,intercept,slope_x1"));
    assert_eq!(header(&out.join("main_effects.csv")), "variable,grid,value,strength");
    assert_eq!(header(&out.join("interactions.csv")), "variable,by,strength");
    assert_eq!(header(&out.join("ale.csv")), "variable,grid,value");
    assert!(header(&out.join("importance.csv")).starts_with("neuron,importance,x1"));
    let interactions = fs::read_to_string(out.join("interactions.csv")).unwrap();
    assert_eq!(interactions.lines().count(), 1 + 36);
}

#[test]
fn sweep_writes_one_row_per_cutoff() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "500", "9");
    let out = tmp.path().join("sweep");
    ok(&["sweep", "--data", s(&data), "--hidden", "4,3", "--iterations", "5", "--cps", "-0.5,0,0.5", "--out", s(&out)]);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "cp,mean_ratio,learners,accuracy,diversity,total");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn stale_model_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let data = gen(&tmp.path().join("data"), "300", "10");
    let run = tmp.path().join("run");
    train(&data, &run, &[]);
    let path = run.join("model.json");
    let mut model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    model["version"] = serde_json::json!(0);
    fs::write(&path, model.to_string()).unwrap();
    let out = life(&["evaluate", "--model", s(&path), "--data", s(&data), "--out", s(&tmp.path().join("e"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema mismatch"));
}
