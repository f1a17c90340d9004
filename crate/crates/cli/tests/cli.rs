use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/fixtures/forest100.jsonl"
);
const GOLDEN: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/fixtures/pipeline.sha256"
);

const EVAL_CONFIG: &str = "runs = 5\nwindows = [6.0, 12.0]\nbins = 4\n";

fn threadcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_threadcast"))
        .args(args)
        .env_remove("THREADCAST_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = threadcast(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs ingest, fit, predict and evaluate into `dir`; returns the data
/// outputs in a fixed order.
fn pipeline(dir: &Path, workers: &str) -> Vec<PathBuf> {
    let forest = dir.join("forest.bin");
    let fit = dir.join("fit.csv");
    let pred = dir.join("predict.csv");
    let eval = dir.join("eval");
    let config = dir.join("eval.toml");
    std::fs::write(&config, EVAL_CONFIG).unwrap();
    let w = ["--workers", workers, "--seed", "42", "--quiet"];
    ok(&[&w[..], &["ingest", "--in", FIXTURE, "--out", s(&forest)]].concat());
    ok(&[
        &w[..],
        &[
            "fit",
            "--forest",
            s(&forest),
            "--t-learn",
            "8",
            "--out",
            s(&fit),
        ],
    ]
    .concat());
    ok(&[
        &w[..],
        &[
            "predict",
            "--forest",
            s(&forest),
            "--t-learn",
            "8",
            "--runs",
            "10",
            "--out",
            s(&pred),
        ],
    ]
    .concat());
    ok(&[
        &w[..],
        &[
            "evaluate",
            "--forest",
            s(&forest),
            "--config",
            s(&config),
            "--out",
            s(&eval),
        ],
    ]
    .concat());
    vec![
        forest,
        fit,
        pred,
        eval.join("rows.csv"),
        eval.join("bins.csv"),
        eval.join("skips.csv"),
    ]
}

fn digest(files: &[PathBuf]) -> String {
    let mut h = Sha256::new();
    for f in files {
        h.update(f.file_name().unwrap().to_str().unwrap().as_bytes());
        h.update(std::fs::read(f).unwrap());
    }
    hex::encode(h.finalize())
}

#[test]
fn help_and_usage_errors() {
    let help = threadcast(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("evaluate"));
    assert_eq!(
        threadcast(&["fit", "--no-such-flag"]).status.code(),
        Some(2)
    );
    assert_eq!(threadcast(&["frobnicate"]).status.code(), Some(2));
    let missing = threadcast(&[
        "stats",
        "--forest",
        "/nonexistent/forest.bin",
        "--out",
        "/tmp/x.csv",
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    assert_eq!(
        threadcast(&[
            "--workers",
            "0",
            "simulate-pa",
            "--n",
            "5",
            "--out",
            "/tmp/x"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn pipeline_reproduces_the_golden_digest() {
    let dir = tempfile::tempdir().unwrap();
    let files = pipeline(dir.path(), "1");
    for f in &files {
        assert!(std::fs::metadata(f).unwrap().len() > 0, "{}", f.display());
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("eval/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 42);
    // forest and config file
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);

    let got = digest(&files);
    if std::env::var_os("THREADCAST_BLESS").is_some() {
        std::fs::write(GOLDEN, format!("{got}\n")).unwrap();
    }
    let want = std::fs::read_to_string(GOLDEN).expect("golden digest checked in");
    assert_eq!(got, want.trim());
}

#[test]
fn worker_count_does_not_change_outputs() {
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    let a = pipeline(one.path(), "1");
    let b = pipeline(two.path(), "2");
    for (x, y) in a.iter().zip(&b) {
        assert!(
            std::fs::read(x).unwrap() == std::fs::read(y).unwrap(),
            "{}",
            x.display()
        );
    }
}

#[test]
fn simulate_and_stats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let forest = dir.path().join("sim.bin");
    let stats = dir.path().join("stats.csv");
    let ccdf = dir.path().join("ccdf.csv");
    ok(&[
        "--seed",
        "7",
        "simulate",
        "--params",
        "a=20,b=3,alpha=1,mu=-1,sigma=1.2,n_b=0.6",
        "--runs",
        "25",
        "--out",
        s(&forest),
    ]);
    ok(&["stats", "--forest", s(&forest), "--out", s(&stats)]);
    ok(&[
        "stats",
        "--forest",
        s(&forest),
        "--ccdf",
        "sizes",
        "--out",
        s(&ccdf),
    ]);
    let text = std::fs::read_to_string(&stats).unwrap();
    assert_eq!(text.lines().count(), 26);
    let last = std::fs::read_to_string(&ccdf).unwrap();
    assert!(last.trim_end().ends_with(",0") || last.trim_end().ends_with(",0.0"));

    let pa = dir.path().join("pa.bin");
    ok(&["simulate-pa", "--n", "50", "--runs", "3", "--out", s(&pa)]);
    let pa_stats = dir.path().join("pa.csv");
    ok(&["stats", "--forest", s(&pa), "--out", s(&pa_stats)]);
    assert_eq!(
        std::fs::read_to_string(&pa_stats).unwrap().lines().count(),
        4
    );
}
