//! End-to-end tests of the `segdiag` binary against the bundled fixtures.
//!
//! Set `SEGDIAG_BLESS=1` to rewrite golden files after an intended change.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fx(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

fn segdiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segdiag"))
        .args(args)
        .env("SEGDIAG_THREADS", "2")
        .output()
        .expect("spawn segdiag")
}

fn run_ok(args: &[&str]) -> Output {
    let out = segdiag(args);
    assert!(
        out.status.success(),
        "segdiag {:?} failed: {:?}\n{}",
        args,
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_golden(actual: &[u8], golden: &str) {
    let path = fixtures().join(golden);
    if std::env::var_os("SEGDIAG_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(
        String::from_utf8_lossy(actual),
        String::from_utf8_lossy(&expected),
        "output differs from {golden}"
    );
}

/// The golden file stores fixture-relative paths; run from the fixture dir.
fn eval_in_fixtures(report: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_segdiag"))
        .current_dir(fixtures())
        .args([
            "eval",
            "--train",
            "train.txt",
            "--gold",
            "gold.txt",
            "--pred",
            "pred.txt",
        ])
        .args(["--attribute", "wLen", "--report"])
        .arg(report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn eval_matches_golden_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("eval.json");
    eval_in_fixtures(&report);
    assert_golden(&fs::read(&report).unwrap(), "eval_wlen.golden.json");
}

#[test]
fn golden_eval_agrees_with_hand_oracle() {
    // Gold word lengths: 1 x4, 2 x8, 3 x3; three distinct values, one bucket each.
    // Predicted lengths: 1 x10, 2 x8, 3 x1. Matches per gold bucket: 4, 6, 1.
    let v = read_json(&fixtures().join("eval_wlen.golden.json"));
    let expected = [("S", 4, 10, 4), ("M", 8, 8, 6), ("L", 3, 1, 1)];
    let buckets = v["buckets"].as_array().unwrap();
    assert_eq!(buckets.len(), 3);
    for (b, (label, g, p, m)) in buckets.iter().zip(expected) {
        assert_eq!(b["label"], label);
        assert_eq!(b["gold_count"], g);
        assert_eq!(b["pred_count"], p);
        assert_eq!(b["match_count"], m);
        let (prec, rec) = (m as f64 / p as f64, m as f64 / g as f64);
        let f1 = 2.0 * prec * rec / (prec + rec);
        assert!((b["f1"].as_f64().unwrap() - f1).abs() < 1e-12);
    }
    let (prec, rec) = (11.0 / 19.0, 11.0 / 15.0);
    assert!((v["corpus"]["precision"].as_f64().unwrap() - prec).abs() < 1e-12);
    assert!((v["corpus"]["recall"].as_f64().unwrap() - rec).abs() < 1e-12);
    assert_eq!(v["bucket_specs"][0]["lo"], 1.0);
    assert_eq!(v["bucket_specs"][2]["hi"], Value::Null);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["buckets_realized"], 3);
}

#[test]
fn same_command_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    eval_in_fixtures(&a);
    eval_in_fixtures(&b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn exit_codes() {
    let buckets_one = segdiag(&[
        "eval",
        "--train",
        &fx("train.txt"),
        "--gold",
        &fx("gold.txt"),
        "--pred",
        &fx("pred.txt"),
        "--attribute",
        "wLen",
        "--buckets",
        "1",
    ]);
    assert_eq!(buckets_one.status.code(), Some(1));

    assert_eq!(segdiag(&["eval", "--unknown-flag"]).status.code(), Some(1));
    assert_eq!(
        segdiag(&[
            "eval",
            "--train",
            "x",
            "--gold",
            "y",
            "--pred",
            "z",
            "--attribute",
            "size"
        ])
        .status
        .code(),
        Some(1)
    );

    let missing = segdiag(&[
        "eval",
        "--train",
        "/nonexistent/train.txt",
        "--gold",
        &fx("gold.txt"),
        "--pred",
        &fx("pred.txt"),
        "--attribute",
        "wLen",
    ]);
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.txt");
    fs::write(&short, "图书馆 周末 会 关闭\n").unwrap();
    let misaligned = segdiag(&[
        "eval",
        "--train",
        &fx("train.txt"),
        "--gold",
        &fx("gold.txt"),
        "--pred",
        short.to_str().unwrap(),
        "--attribute",
        "wLen",
    ]);
    assert_eq!(misaligned.status.code(), Some(1));

    let bad_utf8 = dir.path().join("bad.txt");
    fs::write(&bad_utf8, b"ab \xff\n").unwrap();
    let out = segdiag(&[
        "attrs",
        "--train",
        bad_utf8.to_str().unwrap(),
        "--test",
        &fx("gold.txt"),
    ]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(segdiag(&["--help"]).status.code(), Some(0));
}

#[test]
fn help_lists_every_subcommand() {
    let out = run_ok(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in [
        "attrs", "eval", "tensor", "measures", "diagnose", "cross", "select", "segment", "friedman",
    ] {
        assert!(text.contains(cmd), "--help misses {cmd}");
    }
}

#[test]
fn attrs_tsv_layout() {
    let out = run_ok(&["attrs", "--train", &fx("train.txt"), "--test", &fx("gold.txt")]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "sentence_index\tstart\tend\ttext\twLen\tsLen\toDen\twFre\tcFre\twCon\tcCon"
    );
    assert_eq!(lines.len(), 1 + 15);
    // 图书馆 in sentence 0: length 3, sentence of 8 chars, nothing OOV.
    let first: Vec<&str> = lines[1].split('\t').collect();
    assert_eq!(&first[..6], &["0", "0", "3", "图书馆", "3", "8"]);
    assert_eq!(first[6], "0.000000");
    for field in &first[6..] {
        assert_eq!(field.split('.').nth(1).map(str::len), Some(6));
    }
}

fn build_tensor(dir: &Path, name: &str, preds: &[(&str, &str)]) -> PathBuf {
    let out = dir.join(format!("{name}.json"));
    let mut args = vec![
        "tensor".to_string(),
        "--train".into(),
        fx("train.txt"),
        "--gold".into(),
        fx("gold.txt"),
        "--dataset".into(),
        name.into(),
        "--out".into(),
        out.display().to_string(),
    ];
    for (m, p) in preds {
        args.push("--pred".into());
        args.push(format!("{m}={p}"));
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run_ok(&refs);
    out
}

#[test]
fn tensor_measures_diagnose_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let tensor = build_tensor(
        dir.path(),
        "toy",
        &[("gold", &fx("gold.txt")), ("noisy", &fx("pred.txt"))],
    );
    let t = read_json(&tensor);
    assert_eq!(t["models"], serde_json::json!(["gold", "noisy"]));
    assert_eq!(t["attributes"].as_array().unwrap().len(), 7);
    assert_eq!(t["corpus"][0]["f1"], 1.0);

    let measures = dir.path().join("measures.json");
    run_ok(&[
        "measures",
        "--tensor",
        tensor.to_str().unwrap(),
        "--significance",
        "--out",
        measures.to_str().unwrap(),
    ]);
    let m = read_json(&measures);
    let ds = &m["datasets"][0];
    for key in [
        "s_rho",
        "s_sigma",
        "s_rho_percent",
        "s_sigma_percent",
        "alpha_mu",
        "alpha_rho",
        "corpus_f1",
    ] {
        assert!(!ds[key].is_null(), "measures report misses {key}");
    }
    // the perfect system has a constant slice everywhere
    assert!(ds["s_rho"][0].as_array().unwrap().iter().all(Value::is_null));
    assert_eq!(ds["s_sigma"][0][0], 0.0);
    assert!(m["significance"]["by_dataset"].is_array());
    assert!(m["significance"]["by_dataset_not_significant"].is_array());

    let diag = dir.path().join("diag.json");
    let tsv = dir.path().join("diag.tsv");
    run_ok(&[
        "diagnose",
        "--self",
        tensor.to_str().unwrap(),
        "--model",
        "noisy",
        "--out",
        diag.to_str().unwrap(),
        "--tsv",
        tsv.to_str().unwrap(),
    ]);
    let d = read_json(&diag);
    let wlen = &d["self_diagnosis"]["entries"][0];
    assert_eq!(wlen["attribute"], "wLen");
    assert_eq!(wlen["worst_bucket_label"], "L");
    assert!(fs::read_to_string(&tsv)
        .unwrap()
        .starts_with("attribute\tbucket\tworst_f1\tgap\n"));

    let aided = dir.path().join("aided.json");
    run_ok(&[
        "diagnose",
        "--aided",
        tensor.to_str().unwrap(),
        tensor.to_str().unwrap(),
        "--model-a",
        "noisy",
        "--model-b",
        "gold",
        "--out",
        aided.to_str().unwrap(),
    ]);
    let a = read_json(&aided);
    assert_eq!(a["aided_diagnosis"]["swapped"], true);
    assert_eq!(a["aided_diagnosis"]["model_a"], "gold");
}

#[test]
fn measures_over_several_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let preds = [("gold", fx("gold.txt")), ("noisy", fx("pred.txt"))];
    let preds: Vec<(&str, &str)> = preds.iter().map(|(m, p)| (*m, p.as_str())).collect();
    let t1 = build_tensor(dir.path(), "d1", &preds);
    let t2 = build_tensor(dir.path(), "d2", &preds);
    let out = dir.path().join("m.json");
    run_ok(&[
        "measures",
        "--tensor",
        t1.to_str().unwrap(),
        "--tensor",
        t2.to_str().unwrap(),
        "--significance",
        "--out",
        out.to_str().unwrap(),
    ]);
    let m = read_json(&out);
    assert_eq!(m["radar"]["alpha_mu_normalized"].as_array().unwrap().len(), 2);
    assert_eq!(m["averages"]["s_rho"][1].as_array().unwrap().len(), 7);
    assert!(m["averages"]["s_rho"][0][0]["excluded"].as_u64().unwrap() == 2);
    assert_eq!(m["significance"]["by_model"].as_array().unwrap().len(), 2);
    assert_eq!(m["config"]["tensors"].as_array().unwrap().len(), 2);
}

#[test]
fn segment_and_evaluate_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("fmm.txt");
    run_ok(&[
        "segment",
        "--dict-from",
        &fx("train.txt"),
        "--input",
        &fx("gold.txt"),
        "--out",
        pred.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&pred).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().next().unwrap(), "图书馆 周末 会 关闭");
    let report = dir.path().join("r.json");
    run_ok(&[
        "eval",
        "--train",
        &fx("train.txt"),
        "--gold",
        &fx("gold.txt"),
        "--pred",
        pred.to_str().unwrap(),
        "--attribute",
        "oDen",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(read_json(&report)["corpus"]["f1"].as_f64().unwrap() > 0.5);
}

#[test]
fn friedman_command() {
    let out = run_ok(&["friedman", "--table", &fx("table.tsv"), "--exact"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_blocks"], 4);
    assert_eq!(v["k_treatments"], 3);
    assert_eq!(v["dof"], 2);
    // every block ranks S < M < L: Q = 8
    assert!((v["statistic"].as_f64().unwrap() - 8.0).abs() < 1e-12);
    assert!((v["p_value"].as_f64().unwrap() - (-4.0f64).exp()).abs() < 1e-12);
    assert!((v["exact_p_value"].as_f64().unwrap() - 6.0 / 1296.0).abs() < 1e-12);
}

fn write_workspace(dir: &Path) -> PathBuf {
    // Two criteria: "a" keeps 图书馆 whole, "b" splits it.
    fs::write(dir.join("a_train.txt"), "图书馆 在 周末 关闭\n我们 去 图书馆\n").unwrap();
    fs::write(dir.join("a_test.txt"), "我们 在 图书馆\n").unwrap();
    fs::write(dir.join("b_train.txt"), "图书 馆 在 周末 关闭\n我们 去 图书 馆\n").unwrap();
    fs::write(dir.join("b_test.txt"), "我们 在 图书 馆\n").unwrap();
    fs::write(dir.join("pred_aa.txt"), "我们 在 图书馆\n").unwrap();
    fs::write(dir.join("pred_ba.txt"), "我们 在 图书 馆\n").unwrap();
    fs::write(dir.join("pred_bb.txt"), "我们 在 图书 馆\n").unwrap();
    fs::write(dir.join("pred_ab.txt"), "我们 在 图书馆\n").unwrap();
    let ws = serde_json::json!({
        "datasets": [
            {"name": "a", "train": "a_train.txt", "test": "a_test.txt"},
            {"name": "b", "train": "b_train.txt", "test": "b_test.txt"}
        ],
        "runs": [{"model": "fmm", "dataset": "a", "pred": "pred_aa.txt"}],
        "cross_runs": [
            {"source": "a", "target": "a", "model": "fmm", "pred": "pred_aa.txt"},
            {"source": "b", "target": "a", "model": "fmm", "pred": "pred_ba.txt"},
            {"source": "b", "target": "b", "model": "fmm", "pred": "pred_bb.txt"},
            {"source": "a", "target": "b", "model": "fmm", "pred": "pred_ab.txt"}
        ],
        "options": {"buckets": 3, "seed": 7}
    });
    let path = dir.join("ws.json");
    fs::write(&path, serde_json::to_string_pretty(&ws).unwrap()).unwrap();
    path
}

#[test]
fn cross_workspace_report() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path());
    let out = dir.path().join("cross.json");
    run_ok(&[
        "cross",
        "--workspace",
        ws.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let v = read_json(&out);
    assert_eq!(v["u_hat"][0][0][0], 0.0);
    assert_eq!(v["u_hat"][1][1][0], 0.0);
    assert!(v["u_hat"][1][0][0].as_f64().unwrap() > 0.0);
    assert_eq!(v["coverage"]["observed"], 4);
    assert!(v["psi"][0][0].as_f64().unwrap() > v["psi"][1][0].as_f64().unwrap());
    assert_eq!(v["edges"]["psi"].as_array().unwrap().len(), 1);
    assert!(v["correlations"][0]["pooled"].is_number() || v["correlations"][0]["pooled"].is_null());

    let tensor = dir.path().join("t.json");
    run_ok(&[
        "tensor",
        "--workspace",
        ws.to_str().unwrap(),
        "--dataset",
        "a",
        "--attributes",
        "wLen,oDen",
        "--buckets",
        "2",
        "--out",
        tensor.to_str().unwrap(),
    ]);
    assert_eq!(read_json(&tensor)["attributes"], serde_json::json!(["wLen", "oDen"]));
}

#[test]
fn workspace_with_missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path());
    fs::remove_file(dir.path().join("pred_ab.txt")).unwrap();
    let out = segdiag(&["cross", "--workspace", ws.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn select_plan_records_seed_and_steps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("t_train.txt"), "这本 书 很 好\n").unwrap();
    fs::write(d.join("t_dev.txt"), "这本 书 很 好\n那本 书 不 好\n").unwrap();
    fs::write(d.join("s1.txt"), "那 本 书 不 好\n").unwrap();
    fs::write(d.join("s2.txt"), "那本 书 不 好\n").unwrap();
    fs::write(
        d.join("target.json"),
        r#"{"name": "t", "train": "t_train.txt", "dev": "t_dev.txt"}"#,
    )
    .unwrap();
    fs::write(d.join("split.json"), r#"{"name": "split", "train": "s1.txt"}"#).unwrap();
    fs::write(d.join("same.json"), r#"{"name": "same", "train": "s2.txt"}"#).unwrap();
    let run = |strategy: &str, out: &str| {
        let out = d.join(out);
        run_ok(&[
            "select",
            "--target",
            d.join("target.json").to_str().unwrap(),
            "--sources",
            d.join("split.json").to_str().unwrap(),
            d.join("same.json").to_str().unwrap(),
            "--strategy",
            strategy,
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        out
    };
    let max = read_json(&run("max", "max.json"));
    assert_eq!(max["order_names"], serde_json::json!(["same", "split"]));
    assert_eq!(max["plan"]["steps"].as_array().unwrap().len(), 2);
    let r1 = fs::read(run("rand", "r1.json")).unwrap();
    let r2 = fs::read(run("rand", "r2.json")).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(read_json(&d.join("r1.json"))["plan"]["seed"], 11);
}
