use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hamindex"))
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hamindex-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Runs the binary on `config`, returning the parsed report and exit code.
fn run(config: &Path, extra: &[&str]) -> (Value, i32) {
    let out = bin().arg("--config").arg(config).args(extra).output().unwrap();
    let report: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad report ({e}): {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr)));
    (report, out.status.code().unwrap())
}

fn run_text(name: &str, text: &str) -> (Value, i32) {
    let dir = scratch(name);
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    run(&path, &[])
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("timing");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn close(a: &Value, b: &Value, at: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())) {
                Ok(())
            } else {
                Err(format!("{at}: {x} != {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).enumerate().try_for_each(|(i, (p, q))| close(p, q, &format!("{at}[{i}]")))
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x.iter().try_for_each(|(k, p)| match y.get(k) {
            Some(q) => close(p, q, &format!("{at}.{k}")),
            None => Err(format!("{at}.{k} missing")),
        }),
        _ if a == b => Ok(()),
        _ => Err(format!("{at}: {a} != {b}")),
    }
}

const EXAMPLES: &[&str] =
    &["validate", "monodromy", "winding", "sfl", "cz", "sturm", "bifurcate", "orbit", "theorem-check", "theorem-check-loop"];

/// Reports of the shipped example configs match the stored golden files,
/// with timings removed and numbers compared to 1e-9 relative.
/// `UPDATE_GOLDEN=1` rewrites them.
#[test]
fn example_configs_match_golden_reports() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in EXAMPLES {
        let config = crate_dir().join("configs").join(format!("{name}.json"));
        let (mut report, code) = run(&config, &[]);
        assert_eq!(code, 0, "{name}: {report}");
        assert_eq!(report["status"], "ok");
        strip_timing(&mut report);
        let golden = crate_dir().join("tests/golden").join(format!("{name}.json"));
        if update {
            fs::create_dir_all(golden.parent().unwrap()).unwrap();
            fs::write(&golden, serde_json::to_string_pretty(&report).unwrap() + "\n").unwrap();
            continue;
        }
        let expected: Value = serde_json::from_str(&fs::read_to_string(&golden).unwrap()).unwrap();
        if let Err(diff) = close(&report, &expected, name) {
            panic!("golden mismatch: {diff}");
        }
    }
}

#[test]
fn example_results() {
    let dir = crate_dir().join("configs");
    let (r, _) = run(&dir.join("winding.json"), &[]);
    assert_eq!(r["result"]["index"]["index"], 2);
    let (r, _) = run(&dir.join("cz.json"), &[]);
    assert_eq!(r["result"]["cz"]["index"], 4);
    let (r, _) = run(&dir.join("theorem-check.json"), &[]);
    let rep = &r["result"]["report"];
    for key in ["monodromy_winding", "sfl_a", "sfl_l", "cz"] {
        assert_eq!(rep[key], 4, "{key}");
    }
    let (r, _) = run(&dir.join("orbit.json"), &[]);
    let amp = r["result"]["outcome"]["orbit"]["amplitude"].as_f64().unwrap();
    assert!((amp - 0.1f64.sqrt()).abs() < 1e-6);
}

#[test]
fn degenerate_endpoint_exits_3() {
    let (r, code) = run_text(
        "endpoint",
        r#"{"version": 1, "family": {"n": 1, "diagonal": "lambda"}, "task": {"command": "theorem-check", "path": [[1.0], [1.5]]}}"#,
    );
    assert_eq!(code, 3);
    assert_eq!(r["status"], "error");
    assert_eq!(r["error"]["kind"], "not-admissible");
    assert_eq!(r["error"]["reason"], "endpoint degenerate");
}

#[test]
fn unknown_key_exits_2_with_key_path() {
    let (r, code) = run_text(
        "unknown",
        r#"{"version": 1, "family": {"n": 1, "diagonal": "lambda"}, "numerics": {"tolerance": 1e-9}, "task": {"command": "winding", "path": [[0.5], [1.5]]}}"#,
    );
    assert_eq!(code, 2);
    let msg = r["error"]["message"].as_str().unwrap();
    assert!(msg.contains("numerics"), "{msg}");
    assert!(msg.contains("tolerance"), "{msg}");
    assert_eq!(r["error"]["kind"], "config");
}

#[test]
fn nonpositive_threshold_and_bad_family_exit_2() {
    let (r, code) = run_text(
        "negative",
        r#"{"version": 1, "family": {"n": 1, "diagonal": "lambda"}, "numerics": {"tol": -1.0}, "task": {"command": "winding", "path": [[0.5], [1.5]]}}"#,
    );
    assert_eq!(code, 2);
    assert!(r["error"]["message"].as_str().unwrap().contains("numerics.tol"));
    let (r, code) = run_text(
        "asymmetric",
        r#"{"version": 1, "family": {"n": 1, "s": [["lambda", "t"], ["0", "lambda"]]}, "domain": {"kind": "interval", "a": 0, "b": 1, "resolution": 3}, "task": {"command": "validate"}}"#,
    );
    assert_eq!(code, 2);
    assert_eq!(r["result"]["passed"], false);
    let (_, code) = run_text(
        "syntax",
        r#"{"version": 1, "family": {"n": 1, "diagonal": "lambda +"}, "task": {"command": "winding", "path": [[0.5], [1.5]]}}"#,
    );
    assert_eq!(code, 2);
}

#[test]
fn runs_are_deterministic() {
    let config = crate_dir().join("configs/sfl.json");
    let (mut a, _) = run(&config, &[]);
    let (mut b, _) = run(&config, &[]);
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);
    let random = r#"{"version": 1, "family": {"n": 1, "random": true}, "task": {"command": "monodromy", "lambda": [0.7]}}"#;
    let dir = scratch("random");
    fs::write(dir.join("c.json"), random).unwrap();
    let (a, _) = run(&dir.join("c.json"), &["--seed", "11"]);
    let (b, _) = run(&dir.join("c.json"), &["--seed", "11"]);
    let (c, _) = run(&dir.join("c.json"), &["--seed", "12"]);
    assert_eq!(a["result"], b["result"]);
    assert_ne!(a["result"], c["result"]);
}

#[test]
fn out_file_and_traces() {
    let dir = scratch("files");
    let out = dir.join("report.json");
    let traces = dir.join("traces");
    let status = bin()
        .arg("--config")
        .arg(crate_dir().join("configs/winding.json"))
        .arg("--out")
        .arg(&out)
        .arg("--traces")
        .arg(&traces)
        .status()
        .unwrap();
    assert!(status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["command"], "winding");
    let mut rdr = csv::Reader::from_path(traces.join("winding.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().len(), 7);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(rows.len() > 10);
    let phase: f64 = rows.last().unwrap()[6].parse().unwrap();
    assert!((phase / (2.0 * std::f64::consts::PI) - 2.0).abs() < 0.5);
}
