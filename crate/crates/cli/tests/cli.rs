use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_meshnoise");

const OCTAHEDRON: &str = "\
v 1 0 0
v -1 0 0
v 0 1 0
v 0 -1 0
v 0 0 1
v 0 0 -1
f 1 3 5
f 3 2 5
f 2 4 5
f 4 1 5
f 3 1 6
f 2 3 6
f 4 2 6
f 1 4 6
";

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("MESHNOISE_OUT_DIR")
        .output()
        .expect("spawn meshnoise")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Validator for the JSON Schema keywords the shipped schemas use.
mod schema_check {
    use serde_json::Value;

    pub fn validate(root: &Value, value: &Value) -> Result<(), String> {
        check(root, root, value, "$")
    }

    fn resolve<'a>(root: &'a Value, reference: &str) -> &'a Value {
        let pointer = reference.strip_prefix('#').expect("local reference");
        root.pointer(pointer)
            .unwrap_or_else(|| panic!("unresolved {reference}"))
    }

    fn has_type(value: &Value, ty: &str) -> bool {
        match ty {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            other => panic!("unsupported type {other}"),
        }
    }

    fn check(root: &Value, schema: &Value, value: &Value, at: &str) -> Result<(), String> {
        let fail = |what: String| Err(format!("{at}: {what}"));
        if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
            return check(root, resolve(root, r), value, at);
        }
        if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
            let matches = options.iter().filter(|s| check(root, s, value, at).is_ok()).count();
            if matches != 1 {
                return fail(format!("{matches} oneOf branches match"));
            }
        }
        if let Some(c) = schema.get("const") {
            if c != value {
                return fail(format!("expected {c}"));
            }
        }
        if let Some(options) = schema.get("enum").and_then(Value::as_array) {
            if !options.contains(value) {
                return fail(format!("{value} not in enum"));
            }
        }
        if let Some(ty) = schema.get("type") {
            let ok = match ty {
                Value::String(t) => has_type(value, t),
                Value::Array(ts) => ts.iter().any(|t| has_type(value, t.as_str().unwrap())),
                _ => panic!("bad type keyword"),
            };
            if !ok {
                return fail(format!("{value} is not {ty}"));
            }
        }
        if let Some(x) = value.as_f64() {
            if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
                if x < min {
                    return fail(format!("{x} < {min}"));
                }
            }
            if let Some(max) = schema.get("maximum").and_then(Value::as_f64) {
                if x > max {
                    return fail(format!("{x} > {max}"));
                }
            }
        }
        if let Some(items) = value.as_array() {
            let len = items.len() as u64;
            if schema.get("minItems").and_then(Value::as_u64).is_some_and(|m| len < m)
                || schema.get("maxItems").and_then(Value::as_u64).is_some_and(|m| len > m)
            {
                return fail(format!("{len} items out of bounds"));
            }
            if let Some(item_schema) = schema.get("items") {
                for (i, item) in items.iter().enumerate() {
                    check(root, item_schema, item, &format!("{at}[{i}]"))?;
                }
            }
        }
        if let Some(object) = value.as_object() {
            let properties = schema.get("properties").and_then(Value::as_object);
            for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
                let key = key.as_str().unwrap();
                if !object.contains_key(key) {
                    return fail(format!("missing {key}"));
                }
            }
            for (key, v) in object {
                match properties.and_then(|p| p.get(key)) {
                    Some(s) => check(root, s, v, &format!("{at}.{key}"))?,
                    None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                        return fail(format!("unexpected property {key}"))
                    }
                    None => {}
                }
            }
        }
        Ok(())
    }

    #[test]
    fn rejects_what_it_should() {
        let root = serde_json::json!({
            "type": "object",
            "required": ["a"],
            "additionalProperties": false,
            "properties": {
                "a": { "type": "integer", "minimum": 1 },
                "b": { "oneOf": [{ "type": "null" }, { "enum": ["x"] }] }
            }
        });
        assert!(validate(&root, &serde_json::json!({ "a": 2, "b": null })).is_ok());
        assert!(validate(&root, &serde_json::json!({ "a": 2, "b": "x" })).is_ok());
        for bad in [
            serde_json::json!({}),
            serde_json::json!({ "a": 0 }),
            serde_json::json!({ "a": 1.5 }),
            serde_json::json!({ "a": 1, "c": 1 }),
            serde_json::json!({ "a": 1, "b": "y" }),
        ] {
            assert!(validate(&root, &bad).is_err(), "{bad}");
        }
    }
}

#[test]
fn sample_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let mesh = dir.path().join("octahedron.obj");
    fs::write(&mesh, OCTAHEDRON).unwrap();
    let outputs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|sub| {
            let out_dir = dir.path().join(sub);
            let out = run(&[
                "sample",
                path_str(&mesh),
                "--model",
                "matern",
                "--tau",
                "100",
                "--n",
                "10",
                "--seed",
                "7",
                "--out",
                path_str(&out_dir),
            ]);
            assert_eq!(code(&out), 0, "{}", stderr(&out));
            assert!(stderr(&out).contains("per sample"), "timing is printed");
            fs::read(out_dir.join("samples.ply")).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8_lossy(&outputs[0]);
    assert!(text.contains("property double sample_9"));
}

#[test]
fn sample_seed_and_thread_count() {
    let dir = TempDir::new().unwrap();
    let draw = |sub: &str, seed: &str, threads: &str| {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "--threads",
            threads,
            "sample",
            "--icosphere",
            "2",
            "-n",
            "4",
            "--channels",
            "2",
            "--seed",
            seed,
            "--format",
            "csv",
            "--out",
            path_str(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read_to_string(out_dir.join("samples.csv")).unwrap()
    };
    let one = draw("a", "3", "1");
    assert_eq!(one, draw("b", "3", "4"));
    assert_ne!(one, draw("c", "4", "1"));
    assert!(one.starts_with("vertex,sample_0_0,sample_0_1,"));
    assert_eq!(one.lines().count(), 163);
}

#[test]
fn missing_mesh_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("no-such-mesh.obj");
    let out = run(&["sample", path_str(&missing), "--out", path_str(&dir.path().join("out"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(path_str(&missing)), "{}", stderr(&out));
    assert!(!dir.path().join("out").exists(), "no work before paths are validated");
}

#[test]
fn malformed_mesh_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let mesh = dir.path().join("quad.obj");
    fs::write(&mesh, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
    let out = run(&["spectrum", path_str(&mesh), "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(path_str(&mesh)));
}

#[test]
fn usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &["sample", "--icosphere", "1", "--tau", "100", "--c", "1"],
        &["sample", "--icosphere", "1", "--no-such-flag"],
        &["sample", "--icosphere", "1", "--model", "gaussian"],
        &["verify", "--icosphere", "1", "--model", "matern", "--c", "1"],
        &["sample"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["sample", "verify", "spectrum", "fmdemo"] {
        let out = run(&[sub, "--help"]);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--out"), "{sub}");
        assert!(text.contains("MESHNOISE_OUT_DIR"), "{sub}");
    }
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(BIN)
        .args(["spectrum", "--icosphere", "1", "--k", "5"])
        .env("MESHNOISE_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(target.join("eigenvalues.csv").is_file());
}

#[test]
fn verify_matern_passes_on_subdivided_icosphere() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "verify",
        "--icosphere",
        "2",
        "--subdivide",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let report = read_json(&dir.path().join("report.json"));
    schema_check::validate(&schema("verify-report.schema.json"), &report).unwrap();
    assert_eq!(report["config"]["samples"], 20_000);
    assert_eq!(report["report"]["meshes"].as_array().unwrap().len(), 2);
    assert_eq!(report["report"]["pass"], true);

    let histograms = fs::read_to_string(dir.path().join("histograms_icosphere2.csv")).unwrap();
    assert!(histograms.starts_with("index,bin_left,bin_right,count\n"));
    assert!(dir.path().join("histograms_icosphere2-sub1.csv").is_file());
}

#[test]
fn verify_naive_fails_on_the_same_inputs() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "verify",
        "--icosphere",
        "2",
        "--subdivide",
        "1",
        "--model",
        "naive",
        "--samples",
        "2000",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let report = read_json(&dir.path().join("report.json"));
    schema_check::validate(&schema("verify-report.schema.json"), &report).unwrap();
    let r = &report["report"];
    let failed = |key: &str| r[key].as_array().unwrap().iter().any(|p| p["pass"] == false);
    assert!(failed("property2") || failed("property3"));
}

#[test]
fn verify_scale_invariance() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "verify",
        "--icosphere",
        "2",
        "--model",
        "matern-normalized",
        "--scales",
        "0.1,2.0",
        "--samples",
        "1000",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(matches!(code(&out), 0 | 1), "{}", stderr(&out));
    let report = read_json(&dir.path().join("report.json"));
    schema_check::validate(&schema("verify-report.schema.json"), &report).unwrap();
    let scale = &report["report"]["scale"];
    assert_eq!(scale["pass"], true);
    assert!(scale["max_relative_deviation"].as_f64().unwrap() <= 1e-8);
    assert_eq!(report["config"]["scale"]["scales"], serde_json::json!([0.1, 2.0]));
}

#[test]
fn spectrum_of_closed_mesh() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "spectrum",
        "--icosphere",
        "2",
        "--eigenvectors",
        "1,2",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    let rows: Vec<(usize, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (i, v) = l.split_once(',').unwrap();
            (i.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 162);
    assert_eq!(rows[0].0, 1);
    assert!(rows[0].1.abs() < 1e-8);
    let ply = fs::read_to_string(dir.path().join("eigenvectors.ply")).unwrap();
    assert!(ply.contains("property double phi_1") && ply.contains("property double phi_2"));

    let out = run(&[
        "spectrum",
        "--icosphere",
        "1",
        "--eigenvectors",
        "50",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn spectrum_refuses_large_meshes() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "spectrum",
        "--icosphere",
        "5",
        "--k",
        "10",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("10242"), "{}", stderr(&out));
}

#[test]
fn fmdemo_default_config_passes() {
    let dir = TempDir::new().unwrap();
    let out = run(&["fmdemo", "--icosphere", "2", "--out", path_str(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&dir.path().join("fmdemo.json"));
    schema_check::validate(&schema("fmdemo-report.schema.json"), &report).unwrap();
    let r = &report["report"];
    assert!(r["max_variance_error"].as_f64().unwrap() <= 0.05);
    assert_eq!(r["config"]["steps"], 100);
    assert_eq!(r["per_mode_variance_error"].as_array().unwrap().len(), 30);

    let table = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(table.starts_with("steps,error,ratio\n25,"));
    let ply = fs::read_to_string(dir.path().join("generated.ply")).unwrap();
    assert!(ply.contains("property double sample_9") && !ply.contains("sample_10"));
}

#[test]
fn fmdemo_single_step_fails_the_variance_check() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "fmdemo",
        "--icosphere",
        "2",
        "--steps",
        "1",
        "--samples",
        "1000",
        "--mmd-samples",
        "100",
        "--write",
        "0",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let report = read_json(&dir.path().join("fmdemo.json"));
    assert!(report["report"]["max_variance_error"].as_f64().unwrap() > 0.5);
    assert!(!dir.path().join("generated.ply").exists());
}
