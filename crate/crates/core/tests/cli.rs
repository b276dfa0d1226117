use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn lexfolio(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexfolio"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Four tickers whose headlines are `t`, `e n`, `e n n`, `e n n n`.
fn worked_example(dir: &TempDir, extra: Value) -> PathBuf {
    let root = dir.path();
    fs::write(
        root.join("prices.csv"),
        "date,T,EN,ENN,ENNN\n2024-01-02,10,10,10,10\n2024-01-03,11,10,9,10\n2024-01-04,12,11,9,10\n",
    )
    .unwrap();
    let lines = [("T", "t"), ("EN", "e n"), ("ENN", "e n n"), ("ENNN", "e n n n")]
        .iter()
        .map(|(t, h)| json!({"ticker": t, "date": "2024-01-03", "title": h}).to_string())
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(root.join("headlines.jsonl"), lines).unwrap();
    let mut cfg = json!({
        "prices": "prices.csv",
        "headlines": "headlines.jsonl",
        "portfolios": [{"name": "example", "tickers": ["T", "EN", "ENN", "ENNN"]}],
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = root.join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn bundled_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic/config.json")
}

#[test]
fn lr_prints_worked_example() {
    let dir = TempDir::new().unwrap();
    let cfg = worked_example(&dir, json!({}));
    let out = dir.path().join("out");
    let o = lexfolio(&["lr", "--weights", "0.4,0.3,0.2,0.1", "--vocab-size", "4"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let value: f64 = stdout(&o).trim().parse().unwrap();
    assert!((value - 0.743).abs() <= 0.001, "{value}");
    let terms = fs::read_to_string(out.join("lr_terms.csv")).unwrap();
    assert!(terms.starts_with("term,probability\n"));
    assert_eq!(terms.lines().count(), 4);
}

#[test]
fn lr_single_term_portfolio_is_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = worked_example(&dir, json!({"portfolios": [{"name": "solo", "tickers": ["T", "EN"]}]}));
    let o = lexfolio(&["lr", "--weights", "1,0"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "0.000000");
}

#[test]
fn missing_prices_is_a_config_error_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, json!({"headlines": "h.jsonl"}).to_string()).unwrap();
    let o = lexfolio(&["lr"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("prices"), "{}", stderr(&o));
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = worked_example(&dir, json!({"not_a_field": 1}));
    let o = lexfolio(&["validate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_flag_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = worked_example(&dir, json!({}));
    let o = lexfolio(&["experiment", "--kind", "nonsense"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn empty_headline_file_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let cfg = worked_example(&dir, json!({}));
    fs::write(dir.path().join("headlines.jsonl"), "").unwrap();
    let o = lexfolio(&["lr"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no headline records"), "{}", stderr(&o));
}

#[test]
fn malformed_prices_are_a_data_error() {
    let dir = TempDir::new().unwrap();
    let cfg = worked_example(&dir, json!({}));
    fs::write(dir.path().join("prices.csv"), "date,T\nnot-a-date,1\n").unwrap();
    let o = lexfolio(&["validate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn validate_counts_windows_over_explicit_span() {
    let dir = TempDir::new().unwrap();
    let cfg = worked_example(&dir, json!({"span": {"start": "2018-01-01", "end": "2024-06-30"}}));
    let o = lexfolio(&["validate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "windows: 17"), "{text}");
    assert!(text.contains("coverage: 4/4 tickers priced"), "{text}");
}

#[test]
fn validate_warns_about_missing_tickers() {
    let dir = TempDir::new().unwrap();
    let cfg = worked_example(
        &dir,
        json!({"portfolios": [{"name": "example", "tickers": ["T", "EN", "GHOST"]}]}),
    );
    let o = lexfolio(&["validate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("GHOST"), "{text}");
    assert!(text.contains("coverage: 2/3 tickers priced"), "{text}");
}

#[test]
fn bundled_dataset_validates_cleanly() {
    let dir = TempDir::new().unwrap();
    let o = lexfolio(&["validate"], &bundled_config(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("warnings: 0"), "{}", stdout(&o));
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn experiments_write_reports_with_stable_shapes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    for kind in ["relationship", "robustness", "optimize"] {
        let o = lexfolio(
            &["experiment", "--kind", kind, "--seed", "11", "--jobs", "1"],
            &bundled_config(),
            out,
        );
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", stderr(&o));
        let report = out.join(format!("report_{kind}.csv"));
        assert_eq!(
            header(&report),
            "portfolio,window,window_start,window_end,metric,statistic,value,status"
        );
        let meta: Value =
            serde_json::from_str(&fs::read_to_string(out.join(format!("metadata_{kind}.json"))).unwrap()).unwrap();
        assert_eq!(meta["seed"], 11);
        assert_eq!(meta["failed_cells"], 0);
        assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    }
    assert_eq!(
        header(&out.join("summary_relationship.csv")),
        "portfolio,table,VOLATILITY,DR_SD,DR_VAR"
    );
    assert_eq!(
        header(&out.join("summary_robustness.csv")),
        "portfolio,LR,VOLATILITY,DR_SD,DR_VAR"
    );
    let opt = fs::read_to_string(out.join("summary_optimize.csv")).unwrap();
    assert_eq!(
        opt.lines().next().unwrap(),
        "portfolio,statistic,LR,VOLATILITY,DR_SD,DR_VAR"
    );
    assert_eq!(opt.lines().count(), 1 + 3 * 5);
    assert!(out.join("weights_optimize.csv").exists());
    assert!(out.join("plot_mixed_sharpe.svg").exists());
}

#[test]
fn experiment_output_is_byte_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = lexfolio(
            &["experiment", "--kind", "robustness", "--jobs", jobs],
            &bundled_config(),
            out,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for file in ["report_robustness.csv", "summary_robustness.csv"] {
        let same = fs::read(a.join(file)).unwrap() == fs::read(b.join(file)).unwrap();
        assert!(same, "{file} differs between thread counts");
    }
}

#[test]
fn seed_flag_changes_sampled_weights() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        let o = lexfolio(
            &["experiment", "--kind", "robustness", "--seed", seed],
            &bundled_config(),
            out,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_ne!(
        fs::read(a.join("report_robustness.csv")).unwrap(),
        fs::read(b.join("report_robustness.csv")).unwrap()
    );
}

#[test]
fn synth_writes_a_runnable_dataset() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    let o = Command::new(env!("CARGO_BIN_EXE_lexfolio"))
        .arg("synth")
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["config.json", "prices.csv", "headlines.jsonl", "vix.csv"] {
        assert_eq!(
            fs::read(data.join(f)).unwrap(),
            fs::read(bundled_config().with_file_name(f)).unwrap(),
            "{f} differs from the bundled copy"
        );
    }
}
