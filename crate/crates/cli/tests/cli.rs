use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FORECAST_HEADER: &str = "model,forecast_date,target_end_date,location,type,quantile,value\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ensdiv"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn ensdiv")
}

fn json_ok(dir: &Path, args: &[&str]) -> Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let out = run(dir, &full);
    assert!(
        out.status.success(),
        "ensdiv {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn error_of(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr line");
    serde_json::from_str(line).expect("error json")
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Two models, Monday forecasts for the following Saturday.
/// Model b skips the third target.
fn small_fixture(dir: &Path) {
    let targets = ["2020-07-11", "2020-07-18", "2020-07-25", "2020-08-01"];
    let fdates = ["2020-07-06", "2020-07-13", "2020-07-20", "2020-07-27"];
    let a = [10.0, 12.0, 13.0, 15.0];
    let b = [12.0, 11.0, 0.0, 18.0];
    let mut body = FORECAST_HEADER.to_string();
    for i in 0..4 {
        body += &format!("a,{},{},US,point,,{}\n", fdates[i], targets[i], a[i]);
        if i != 2 {
            body += &format!("b,{},{},US,point,,{}\n", fdates[i], targets[i], b[i]);
        }
    }
    write(dir, "forecasts.csv", &body);
    write(
        dir,
        "truth.csv",
        "location,date,value\nUS,2020-07-04,9\nUS,2020-07-11,11\nUS,2020-07-18,12\nUS,2020-07-25,14\nUS,2020-08-01,16\n",
    );
}

fn simulate(dir: &Path, config: &str, out: &str) -> (PathBuf, PathBuf) {
    let cfg = write(dir, &format!("{out}.json"), config);
    let o = run(dir, &["simulate", "--sim-config", cfg.to_str().unwrap(), "--output", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (dir.join(out).join("forecasts.csv"), dir.join(out).join("truth.csv"))
}

#[test]
fn residuals_match_hand_count() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    let v = json_ok(tmp.path(), &["residuals", "--forecasts", "forecasts.csv", "--truth", "truth.csv"]);
    let rows = v["residuals"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    let first = &rows.iter().find(|r| r["model"] == "b" && r["target_date"] == "2020-07-11").unwrap();
    assert_eq!(f(&first["residual"]), 1.0);
    assert_eq!(first["horizon"], 1);
    assert_eq!(v["metadata"]["info"]["non_weekly_records"], 7);
}

#[test]
fn missing_truth_value_drops_row() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    write(
        tmp.path(),
        "truth.csv",
        "location,date,value\nUS,2020-07-11,11\nUS,2020-07-18,12\nUS,2020-08-01,16\n",
    );
    let v = json_ok(tmp.path(), &["residuals", "--forecasts", "forecasts.csv", "--truth", "truth.csv"]);
    assert_eq!(v["residuals"].as_array().unwrap().len(), 6);
}

#[test]
fn missing_truth_file_is_io_error() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    let out = run(tmp.path(), &["residuals", "--forecasts", "forecasts.csv", "--truth", "nope.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_of(&out);
    assert_eq!(e["error"]["kind"], "io");
    assert!(e["error"]["path"].as_str().unwrap().ends_with("nope.csv"));
}

#[test]
fn disjoint_dates_are_empty_data() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    write(tmp.path(), "truth.csv", "location,date,value\nUS,2019-01-05,1\nUS,2019-01-12,2\n");
    let out = run(tmp.path(), &["residuals", "--forecasts", "forecasts.csv", "--truth", "truth.csv"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn missing_column_is_schema_error() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    write(tmp.path(), "bad.csv", "model,forecast_date,location,value\na,2020-07-06,US,1\n");
    let out = run(tmp.path(), &["residuals", "--forecasts", "bad.csv", "--truth", "truth.csv"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_config_key_is_config_error() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.json", r#"{"s": 0.9, "n": 4, "bogus": 1}"#);
    let out = run(tmp.path(), &["--config", "c.json", "theory"]);
    assert_eq!(out.status.code(), Some(2));
}

const BLOCK_SIM: &str = r#"{"models": 9, "dates": 2000,
  "correlation": {"kind": "block", "blocks": 3, "within": 0.9, "between": 0.1},
  "error": {"target_skill": 0.9},
  "truth": {"kind": "random_walk", "start": 1000, "step_sd": 1}, "seed": 11}"#;

#[test]
fn block_fixture_recovers_three_clusters() {
    let tmp = TempDir::new().unwrap();
    simulate(tmp.path(), BLOCK_SIM, "blk");
    let v = json_ok(
        tmp.path(),
        &["corr", "--forecasts", "blk/forecasts.csv", "--truth", "blk/truth.csv", "-k", "3"],
    );
    let clusters = v["clusters"].as_array().unwrap();
    let label = |m: &str| clusters.iter().find(|r| r["model"] == m).unwrap()["cluster"].clone();
    for block in 0..3 {
        let ids: Vec<String> = (0..3).map(|j| format!("model_{}", block * 3 + j)).collect();
        assert_eq!(label(&ids[0]), label(&ids[1]));
        assert_eq!(label(&ids[0]), label(&ids[2]));
    }
    assert_ne!(label("model_0"), label("model_3"));
    assert_ne!(label("model_3"), label("model_6"));
    let s = &v["summary"][0];
    assert!((f(&s["within_pairs"]) - 0.9).abs() < 0.03);
    assert!((f(&s["between_pairs"]) - 0.1).abs() < 0.03);
    assert_eq!(v["dendrogram"].as_array().unwrap().len(), 8);
}

#[test]
fn rolling_windows_count() {
    let tmp = TempDir::new().unwrap();
    simulate(
        tmp.path(),
        r#"{"models": 3, "dates": 104, "correlation": {"kind": "equicorrelated", "rho": 0.5},
            "error": {"sigma": 10}, "truth": {"kind": "random_walk", "start": 1000, "step_sd": 1}}"#,
        "roll",
    );
    let v = json_ok(
        tmp.path(),
        &[
            "corr", "--forecasts", "roll/forecasts.csv", "--truth", "roll/truth.csv",
            "--window", "52", "--step", "26",
        ],
    );
    assert_eq!(v["metadata"]["info"]["rolling_windows"], 3);
    let rolling: Vec<&Value> = v["correlations"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["window"] != "full")
        .collect();
    assert_eq!(rolling.len(), 3 * 3);
}

#[test]
fn min_overlap_beyond_data_warns_and_succeeds() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    let out = run(
        tmp.path(),
        &[
            "corr", "--forecasts", "forecasts.csv", "--truth", "truth.csv",
            "--min-overlap", "50", "-k", "2",
        ],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

fn curve(v: &Value) -> Vec<(f64, f64)> {
    v["curve"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["kind"] == "curve")
        .map(|r| (f(&r["rho"]), f(&r["skill_ens"])))
        .collect()
}

#[test]
fn theory_single_model_is_flat() {
    let tmp = TempDir::new().unwrap();
    let v = json_ok(tmp.path(), &["theory", "-s", "0.9", "-n", "1"]);
    let c = curve(&v);
    assert_eq!(c.len(), 101);
    assert!(c.iter().all(|(_, s)| (s - 0.9).abs() < 1e-15));
}

#[test]
fn theory_zero_rho_divides_by_n() {
    let tmp = TempDir::new().unwrap();
    let v = json_ok(tmp.path(), &["theory", "-s", "0.8", "-n", "16", "--rho", "0,1"]);
    let c = curve(&v);
    assert!((c[0].1 - 0.05).abs() < 1e-15);
    assert!((c[1].1 - 0.8).abs() < 1e-15);
}

#[test]
fn theory_observed_outside_range_is_numeric_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["theory", "-s", "0.9", "-n", "10", "--observed", "0.95"]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn mean_ensemble_on_two_models() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    let v = json_ok(tmp.path(), &["ensemble", "--forecasts", "forecasts.csv", "--truth", "truth.csv"]);
    let rows = v["forecasts"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let expected = [(11.0, 2), (11.5, 2), (13.0, 1), (16.5, 2)];
    for (row, (fc, n)) in rows.iter().zip(expected) {
        assert_eq!(f(&row["forecast"]), fc);
        assert_eq!(row["contributors"], n);
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[test]
fn full_shrinkage_gives_inverse_variance_weights() {
    let tmp = TempDir::new().unwrap();
    simulate(
        tmp.path(),
        r#"{"models": 4, "dates": 300, "correlation": {"kind": "equicorrelated", "rho": 0.6},
            "error": {"sigma": 5}, "bias": [0, 1, -2, 0.5],
            "truth": {"kind": "random_walk", "start": 1000, "step_sd": 1}, "seed": 5}"#,
        "shr",
    );
    let inputs = ["--forecasts", "shr/forecasts.csv", "--truth", "shr/truth.csv"];
    let mut args = vec!["ensemble", "--strategy", "min_variance", "--shrinkage", "1"];
    args.extend_from_slice(&inputs);
    let v = json_ok(tmp.path(), &args);
    let mut rargs = vec!["residuals"];
    rargs.extend_from_slice(&inputs);
    let res = json_ok(tmp.path(), &rargs);

    let ids: Vec<String> = (0..4).map(|i| format!("model_{i}")).collect();
    let inv: Vec<f64> = ids
        .iter()
        .map(|id| {
            let xs: Vec<f64> = res["residuals"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|r| r["model"] == id.as_str())
                .map(|r| f(&r["residual"]))
                .collect();
            1.0 / sample_variance(&xs)
        })
        .collect();
    let total: f64 = inv.iter().sum();
    let weights = v["weights"].as_array().unwrap();
    for (id, w) in ids.iter().zip(&inv) {
        let got = f(&weights.iter().find(|r| r["model"] == id.as_str()).unwrap()["weight"]);
        assert!((got - w / total).abs() < 1e-9, "{id}: {got} vs {}", w / total);
    }
}

#[test]
fn single_cluster_equals_mean() {
    let tmp = TempDir::new().unwrap();
    simulate(tmp.path(), BLOCK_SIM, "blk");
    let inputs = ["--forecasts", "blk/forecasts.csv", "--truth", "blk/truth.csv"];
    let mut a = vec!["ensemble"];
    a.extend_from_slice(&inputs);
    let mut b = vec!["ensemble", "--strategy", "cluster_mean", "-k", "1"];
    b.extend_from_slice(&inputs);
    let mean = json_ok(tmp.path(), &a);
    let clus = json_ok(tmp.path(), &b);
    for (x, y) in mean["forecasts"].as_array().unwrap().iter().zip(clus["forecasts"].as_array().unwrap()) {
        assert!((f(&x["forecast"]) - f(&y["forecast"])).abs() < 1e-9);
    }
}

#[test]
fn contribution_single_model_has_no_delta() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    let body: String = std::fs::read_to_string(tmp.path().join("forecasts.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("b,"))
        .map(|l| format!("{l}\n"))
        .collect();
    write(tmp.path(), "one.csv", &body);
    let v = json_ok(tmp.path(), &["contribution", "--forecasts", "one.csv", "--truth", "truth.csv"]);
    let rows = v["contribution"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0]["loo_delta"].is_null());
}

#[test]
fn duplicate_models_contribute_equally() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    let base = std::fs::read_to_string(tmp.path().join("forecasts.csv")).unwrap();
    let clones: String = base
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("a,"))
        .map(|l| format!("a2{}\n", &l[1..]))
        .collect();
    write(tmp.path(), "dup.csv", &(base + &clones));
    let v = json_ok(tmp.path(), &["contribution", "--forecasts", "dup.csv", "--truth", "truth.csv"]);
    let rows = v["contribution"].as_array().unwrap();
    let d = |m: &str| f(&rows.iter().find(|r| r["model"] == m).unwrap()["loo_delta"]);
    assert!((d("a") - d("a2")).abs() < 1e-12);

    let only_a: String = std::fs::read_to_string(tmp.path().join("dup.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("b,"))
        .map(|l| format!("{l}\n"))
        .collect();
    write(tmp.path(), "pair.csv", &only_a);
    let v = json_ok(tmp.path(), &["contribution", "--forecasts", "pair.csv", "--truth", "truth.csv"]);
    for row in v["contribution"].as_array().unwrap() {
        assert!(f(&row["loo_delta"]).abs() < 1e-12);
    }
}

#[test]
fn sweep_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "eq.json",
        r#"{"models": 5, "dates": 200, "correlation": {"kind": "equicorrelated", "rho": 0},
            "error": {"target_skill": 0.9},
            "truth": {"kind": "random_walk", "start": 1000, "step_sd": 1}, "seed": 9}"#,
    );
    let args = ["simulate", "--sim-config", "eq.json", "--sweep", "0,0.5,1", "--reps", "8"];
    let a = run(tmp.path(), &args);
    let b = run(tmp.path(), &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(tmp.path(), &["--seed", "10", "simulate", "--sim-config", "eq.json", "--sweep", "0,0.5,1", "--reps", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn target_skill_on_constant_truth_is_numeric_error() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "c.json",
        r#"{"models": 3, "dates": 50, "correlation": {"kind": "equicorrelated", "rho": 0.2},
            "error": {"target_skill": 0.9}, "truth": {"kind": "constant", "value": 10}}"#,
    );
    let out = run(tmp.path(), &["simulate", "--sim-config", "c.json", "--output", "p"]);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_supplies_parameters() {
    let tmp = TempDir::new().unwrap();
    small_fixture(tmp.path());
    std::fs::create_dir(tmp.path().join("cfg")).unwrap();
    write(
        tmp.path(),
        "cfg/run.json",
        r#"{"subcommand": "ensemble", "forecasts": "../forecasts.csv", "truth": "../truth.csv", "strategy": "median"}"#,
    );
    let v = json_ok(tmp.path(), &["--config", "cfg/run.json", "ensemble"]);
    assert_eq!(v["metadata"]["params"]["strategy"]["strategy"], "median");
    let out = run(tmp.path(), &["--config", "cfg/run.json", "corr"]);
    assert_eq!(out.status.code(), Some(2));
}
