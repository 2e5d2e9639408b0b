#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_chronoscope")
}

/// Writes `config` into `dir/run.json` and returns its path.
pub fn write_config(dir: &Path, config: &serde_json::Value) -> PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

pub fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("CHRONOSCOPE_ENDPOINT")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small two-dataset run: finance-like daily series and sparse monthly counts.
pub fn small_config(out_dir: &Path) -> serde_json::Value {
    serde_json::json!({
        "seed": 17,
        "data": {"datasets": [
            {"name": "fin", "domain": "finance",
             "source": {"type": "synth", "spec": {"kind": "random-walk", "sigma": 1.0, "drift": 0.05}, "length": 250, "n_series": 3, "freq": "business-daily"}},
            {"name": "cars", "domain": "car",
             "source": {"type": "synth", "spec": {"kind": "sparse-poisson", "rate": 2.0}, "length": 60, "n_series": 4, "freq": "monthly"}}
        ]},
        "models": [
            {"kind": "arima", "arima": {"max_p": 2, "max_q": 1, "restarts": 1}},
            {"kind": "gbdt", "gbdt": {"n_estimators": 60}},
            {"kind": "seasonal-naive"},
            {"name": "mock-noisy", "kind": "remote", "endpoint": "mock:noisy"}
        ],
        "explain": {
            "lime": {"model": "arima", "config": {"n_samples": 64}},
            "shap": {"max_rows": 40, "surrogate": {"params": {"n_estimators": 60}}},
            "surrogate": {"config": {"params": {"n_estimators": 60}}}
        },
        "output": {"dir": out_dir}
    })
}

/// Relative paths of every file under `dir`, sorted.
pub fn files(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
