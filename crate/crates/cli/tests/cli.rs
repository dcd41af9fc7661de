//! End-to-end runs of the `contactflex` binary.
//!
//! Golden reports live in `tests/golden/`; `UPDATE_GOLDEN=1` rewrites them.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contactflex"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn golden(name: &str, actual: &Value) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(actual).unwrap() + "\n").unwrap();
        return;
    }
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()));
    let want: Value = serde_json::from_str(&text).unwrap();
    if let Err(msg) = close(actual, &want, name) {
        panic!("golden mismatch {msg}");
    }
}

fn close(a: &Value, b: &Value, at: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-6) {
                Ok(())
            } else {
                Err(format!("{at}: {x} != {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .enumerate()
            .try_for_each(|(i, (u, v))| close(u, v, &format!("{at}[{i}]"))),
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => {
            x.iter().try_for_each(|(k, u)| {
                let v = y.get(k).ok_or_else(|| format!("{at}.{k} missing"))?;
                close(u, v, &format!("{at}.{k}"))
            })
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{at}: {a} != {b}")),
    }
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn factorize_reeb_report_golden() {
    let o = run(&["factorize", "--builtin", "reeb:0.2", "--eps", "0.5", "--box", "1"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["schema"], "contactflex.factorize/1");
    assert_eq!(v["passed"], true);
    assert!(v["report"]["residual_sup"].as_f64().unwrap() <= 1e-6);
    golden("factorize_reeb.json", &v);
}

#[test]
fn null_path_records_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("np.jsonl");
    let o = run(&[
        "null-path",
        "--map",
        "(x, y+0.1, z)",
        "--auto-eps",
        "--grid",
        "5",
        "--times",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout_json(&o);
    assert_eq!(report["verification"]["verdict"], "null");
    assert!(report["verification"]["endpoint_error"].as_f64().unwrap() <= 1e-6);
    let recs = read_jsonl(&out);
    assert_eq!(recs.len(), 125 * 9);
    assert!(recs.iter().all(|r| r["alpha"].as_f64().unwrap() == 0.0));
    golden(
        "null_path_shear.json",
        &serde_json::json!({
            "report": report,
            "records": recs.len(),
            "first": recs[0],
            "last": recs[recs.len() - 1],
        }),
    );
}

#[test]
fn exit_codes_separate_usage_from_failed_checks() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(code(&run(&["verify", "--path", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["factorize"])), 2);
    assert_eq!(code(&run(&["factorize", "--map", "(x, y +, z)"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);

    // A reversed Reeb flow has alpha < 0 everywhere, so expecting positive fails.
    let recipe = dir.path().join("neg.json");
    std::fs::write(
        &recipe,
        r#"{"kind": "reversed", "inner": {"kind": "reeb", "duration": 0.3}}"#,
    )
    .unwrap();
    let o = run(&[
        "verify",
        "--path",
        recipe.to_str().unwrap(),
        "--expect",
        "positive",
        "--grid",
        "3",
        "--times",
        "5",
    ]);
    assert_eq!(code(&o), 1);
    let v = stdout_json(&o);
    assert_eq!(v["passed"], false);
    assert_eq!(v["verdict"], "mixed");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind": "reeb", "duration": 0.3, "extra": 1}"#).unwrap();
    assert_eq!(code(&run(&["verify", "--path", bad.to_str().unwrap()])), 2);
}

#[test]
fn reports_are_deterministic() {
    let args = [
        "positive-path",
        "--builtin",
        "shear:0.1",
        "--reeb-time",
        "0.5",
        "--grid",
        "5",
        "--times",
        "9",
        "--seed",
        "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout_json(&a)["verification"]["verdict"], "positive");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"grid": 3, "times": 5, "tol": 1e-7}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let o = run(&["null-path", "--builtin", "shear:0.1", "--config", c]);
    assert_eq!(code(&o), 0);
    let meta = &stdout_json(&o)["verification"]["meta"];
    assert_eq!(meta["points"], 27);
    assert_eq!(meta["times"], 5);
    assert_eq!(meta["tol"], 1e-7);

    let o = run(&["null-path", "--builtin", "shear:0.1", "--config", c, "--times", "7"]);
    let meta = &stdout_json(&o)["verification"]["meta"];
    assert_eq!(meta["points"], 27);
    assert_eq!(meta["times"], 7);

    std::fs::write(&cfg, r#"{"grid": 3, "colour": "red"}"#).unwrap();
    assert_eq!(code(&run(&["null-path", "--builtin", "shear:0.1", "--config", c])), 2);
}

#[test]
fn written_records_verify_again() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pos.jsonl");
    let o = run(&[
        "positive-path",
        "--reeb-time",
        "0.25",
        "--grid",
        "3",
        "--times",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let o = run(&[
        "verify",
        "--path",
        out.to_str().unwrap(),
        "--target",
        "id",
        "--expect",
        "positive",
        "--grid",
        "3",
        "--times",
        "9",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v = stdout_json(&o);
    assert_eq!(v["verdict"], "positive");
    assert!(v["endpoint_error"].as_f64().unwrap() <= 1e-9);

    let o = run(&[
        "verify",
        "--path",
        out.to_str().unwrap(),
        "--target",
        "reeb:0.25",
        "--grid",
        "3",
        "--times",
        "9",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn legendrian_transport_from_a_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = dir.path().join("null.json");
    std::fs::write(&recipe, r#"{"kind": "null", "map": "shear:0.1"}"#).unwrap();
    let out = dir.path().join("iso.jsonl");
    let o = run(&[
        "legendrian",
        "--jet",
        "y^2/2",
        "--path-from",
        recipe.to_str().unwrap(),
        "--samples",
        "7",
        "--times",
        "5",
        "--expect",
        "null",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["schema"], "contactflex.isotopy/1");
    assert_eq!(v["verdict"], "null");
    assert_eq!(v["alpha"]["max_abs_alpha"], 0.0);
    assert_eq!(read_jsonl(&out).len(), 7 * 5);

    let o = run(&[
        "legendrian",
        "--jet",
        "y",
        "--path-from",
        recipe.to_str().unwrap(),
        "--range",
        "1:-1",
    ]);
    assert_eq!(code(&o), 2);
}
