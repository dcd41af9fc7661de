//! Frozen reports. Set `UPDATE_GOLDEN=1` to rewrite the files under
//! `tests/golden/`; otherwise every number must match to a relative 1e-9.

use std::path::PathBuf;

use contactflex::contact::Point;
use contactflex::diffeo::Diffeo;
use contactflex::extension::{extend_positive, ContactPathInput, ExtensionOptions};
use contactflex::factorize::{factorize, FactorizeOptions};
use contactflex::grid::{Grid, Shell};
use contactflex::legendrian::{jet_legendrian, transport, Jet, JetSampling};
use contactflex::paths::{DiffeoPath, Verdict};
use contactflex::synthesis::{
    far_field_report, null_path_to, positive_path_compact, reeb_amplitudes, reeb_null_path,
    SynthesisOptions,
};
use contactflex::verify::{verify, VerifyConfig};
use serde_json::{json, Value};

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
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
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x.iter().try_for_each(|(k, u)| {
            let v = y.get(k).ok_or_else(|| format!("{at}.{k} missing"))?;
            close(u, v, &format!("{at}.{k}"))
        }),
        _ if a == b => Ok(()),
        _ => Err(format!("{at}: {a} != {b}")),
    }
}

fn check(name: &str, actual: Value) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        let text = serde_json::to_string_pretty(&actual).unwrap();
        std::fs::write(&path, text + "\n").unwrap();
        return;
    }
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()));
    let want: Value = serde_json::from_str(&text).unwrap();
    if let Err(msg) = close(&actual, &want, name) {
        panic!("golden mismatch {msg}");
    }
}

fn sample_points() -> Vec<Point> {
    Grid::cube(1.0, 3).points()
}

#[test]
fn reeb_null_path_golden() {
    let path = reeb_null_path(0.2, 0.5).unwrap();
    let ends: Vec<[f64; 3]> = sample_points()
        .iter()
        .map(|p| {
            let q = path.end().eval(p).unwrap();
            [q.x, q.y, q.z]
        })
        .collect();
    check(
        "reeb_null_path.json",
        json!({
            "amplitudes": reeb_amplitudes(0.2, 0.5),
            "pieces": path.piece_count(),
            "endpoints": ends,
        }),
    );
}

#[test]
fn factorization_report_golden() {
    let f = Diffeo::builtin("reeb:0.2").unwrap();
    let fac = factorize(&f, 0.5, &Grid::cube(1.0, 11), &FactorizeOptions::default()).unwrap();
    check("factorize_reeb.json", serde_json::to_value(&fac.report).unwrap());
}

#[test]
fn shear_null_path_report_golden() {
    let f = Diffeo::parse("(x, y + 0.1, z)").unwrap();
    let s = null_path_to(&f, &SynthesisOptions::default()).unwrap();
    let cfg = VerifyConfig {
        expect: Some(Verdict::Null),
        eps: s.eps,
        ..Default::default()
    };
    let r = verify(&s.path, Some(&f), &cfg).unwrap();
    assert!(r.passed);
    assert!(r.endpoint_error.unwrap() <= 1e-6);
    check("shear_null_path.json", serde_json::to_value(&r).unwrap());
}

#[test]
fn compact_positive_path_far_field_golden() {
    let f = Diffeo::builtin("bumpshear:0.1").unwrap();
    let s = positive_path_compact(&f, 0.01, &SynthesisOptions::default()).unwrap();
    let shell = Shell {
        grid: Grid::cube(4.0, 9),
        min_radius: 3.5,
    };
    let far = far_field_report(&s.path, &shell, 1).unwrap();
    assert!(far.max_displacement <= 0.05, "{far:?}");
    let cfg = VerifyConfig {
        grid: Grid::cube(1.0, 5),
        times: 17,
        expect: Some(Verdict::Positive),
        ..Default::default()
    };
    let r = verify(&s.path, Some(&f), &cfg).unwrap();
    assert!(r.passed, "{r:?}");
    check(
        "positive_compact_bumpshear.json",
        json!({ "eps": s.eps, "far_field": far, "report": r }),
    );
}

#[test]
fn legendrian_isotopy_golden() {
    let l = jet_legendrian(
        &Jet::parse("y^2/2").unwrap(),
        &JetSampling {
            lo: -1.0,
            hi: 1.0,
            n: 5,
        },
    )
    .unwrap();
    let h = contactflex::field::ScalarField::parse("1 + x*y/4").unwrap();
    let path = DiffeoPath::hamiltonian(h, 0.5, 16, contactflex::paths::Warp::Linear);
    let iso = transport(&l, &path, &[0.0, 0.5, 1.0], None).unwrap();
    check("legendrian_isotopy.json", serde_json::to_value(iso.records()).unwrap());
}

#[test]
fn shipped_extension_golden() {
    let ext = extend_positive(&ContactPathInput::shipped_example(), &ExtensionOptions::default())
        .unwrap();
    assert!(ext.report.classification.stats.min_alpha > 0.0);
    assert!(ext.report.far_field_sup <= 1e-9);
    check("extension_shipped.json", serde_json::to_value(&ext.report).unwrap());
}
