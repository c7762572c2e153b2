use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qkinlab"));
    cmd.env_remove("QKINLAB_THREADS");
    cmd
}

fn write_config(dir: &Path, config: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn run(dir: &Path, config: &Value, extra: &[&str]) -> (Output, PathBuf) {
    let path = write_config(dir, config);
    let out = dir.join("out");
    let output = bin().arg("run").arg(&path).arg("--out").arg(&out).args(extra).output().unwrap();
    (output, out)
}

fn check(dir: &Path, config: &Value) -> Output {
    bin().arg("check").arg(write_config(dir, config)).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(out: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(out.join("results.csv")).unwrap().records().map(Result::unwrap).collect()
}

fn vlasov_config(times: Vec<f64>) -> Value {
    json!({
        "seed": 3,
        "experiments": [{
            "name": "vl",
            "kind": "vlasov",
            "initial": { "f1": { "preset": "random_density", "trace": 0.5 } },
            "controls": { "times": times, "time_unit": "t0", "n_trunc": 3, "tolerance": 1e-2 }
        }]
    })
}

#[test]
fn default_identities_pass() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(dir.path(), &json!({ "experiments": [{ "name": "id", "kind": "identities" }] }), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let header = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(header.starts_with("experiment,t,epsilon,quantity,value,tolerance,status\n"));
    let rows = rows(&out);
    assert!(rows.iter().any(|r| &r[3] == "seed" && &r[4] == "0"));
    assert!(rows.iter().filter(|r| &r[6] == "pass").count() >= 10);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], json!(true));
    assert_eq!(summary["experiments"][0]["sources"]["group_law"], json!("propagators::heisenberg_group"));
    assert_eq!(summary["config"]["experiments"][0]["controls"]["n_trunc"], json!(4));
}

#[test]
fn empty_experiment_list_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({ "experiments": [] });
    assert_eq!(check(dir.path(), &cfg).status.code(), Some(2));
    let (o, out) = run(dir.path(), &cfg, &["--force"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("results.csv").exists());
}

#[test]
fn malformed_configs_are_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ \"experiments\": [").unwrap();
    let o = bin().arg("check").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed"));
    for cfg in [
        json!({ "experiments": [{ "name": "x", "kind": "identities", "typo": 1 }] }),
        json!({ "experiments": [{ "name": "x", "kind": "nonsense" }] }),
        json!({ "experiments": [{ "name": "x", "kind": "identities" }, { "name": "x", "kind": "identities" }] }),
        json!({ "experiments": [{ "name": "x", "kind": "identities", "controls": { "dt": -1.0 } }] }),
        json!({ "experiments": [{ "name": "x", "kind": "identities", "model": { "dim": 2, "kinetic": { "preset": "entries", "entries": [[1.0]] } } }] }),
    ] {
        assert_eq!(check(dir.path(), &cfg).status.code(), Some(2), "{cfg}");
    }
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let cfg = json!({
        "seed": 11,
        "experiments": [
            { "name": "id", "kind": "identities" },
            {
                "name": "mf",
                "kind": "meanfield",
                "controls": { "times": [0.2], "time_unit": "t0", "n_trunc": 2, "quadrature_nodes": 6 }
            }
        ]
    });
    let mut tables = Vec::new();
    for threads in ["1", "1", "3"] {
        let dir = TempDir::new().unwrap();
        let path = write_config(dir.path(), &cfg);
        let out = dir.path().join("out");
        let o = bin().env("QKINLAB_THREADS", threads).arg("run").arg(&path).arg("--out").arg(&out).output().unwrap();
        assert!(o.status.code() == Some(0) || o.status.code() == Some(3), "{}", stderr(&o));
        tables.push(std::fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0], tables[2]);
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), &json!({ "experiments": [{ "name": "id", "kind": "identities" }] }));
    let o = bin().env("QKINLAB_THREADS", "zero").arg("run").arg(&path).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn times_beyond_the_convergence_radius_need_force() {
    let dir = TempDir::new().unwrap();
    let cfg = vlasov_config(vec![0.5, 1.2]);
    let o = check(dir.path(), &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("convergence radius"));
    let (o, out) = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("results.csv").exists());
    let (o, out) = run(dir.path(), &cfg, &["--force"]);
    assert_ne!(o.status.code(), Some(2), "{}", stderr(&o));
    let rows = rows(&out);
    assert_eq!(rows.iter().filter(|r| &r[3] == "series_direct_gap").count(), 2);
}

#[test]
fn times_inside_the_radius_pass() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(dir.path(), &vlasov_config(vec![0.2, 0.4]), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = rows(&out);
    let trace = rows.iter().find(|r| &r[3] == "trace_drift").unwrap();
    assert_eq!(&trace[6], "pass");
}

#[test]
fn large_initial_state_warns_but_validates() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "experiments": [{
            "name": "k",
            "kind": "kinetic",
            "initial": { "f1": { "preset": "random_density", "trace": 0.5 } },
            "controls": { "times": [0.1], "n_trunc": 2, "n_max": 3 }
        }]
    });
    let o = check(dir.path(), &cfg);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning [k]"), "{}", stderr(&o));
}

#[test]
fn meanfield_reports_rates() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "seed": 5,
        "experiments": [{
            "name": "mf",
            "kind": "meanfield",
            "initial": { "correlations": { "preset": "scalar", "lambda": 1.3 } },
            "controls": { "times": [0.2, 0.4], "time_unit": "t0", "n_trunc": 3, "quadrature_nodes": 8 }
        }]
    });
    let (o, out) = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = rows(&out);
    for q in ["observable_s2_order", "one_particle_order", "dressed_product_s2_order", "generating_first_s2_order"] {
        let hits: Vec<_> = rows.iter().filter(|r| &r[3] == q).collect();
        assert_eq!(hits.len(), 2, "{q}");
        assert!(hits.iter().all(|r| &r[6] == "pass"), "{q}");
    }
    assert_eq!(rows.iter().filter(|r| &r[3] == "one_particle_error").count(), 6);
}

#[test]
fn gp_requires_on_site_coupling_and_pure_state() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({ "experiments": [{ "name": "g", "kind": "gp", "model": { "dim": 4 } }] });
    let o = check(dir.path(), &cfg);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("on_site") && err.contains("pure"), "{err}");
    let ok = json!({ "experiments": [{
        "name": "g",
        "kind": "gp",
        "model": { "dim": 5, "kinetic": { "preset": "hopping", "periodic": false }, "pair": { "preset": "on_site", "strength": 0.7 } },
        "initial": { "f1": { "preset": "random_pure" } },
        "controls": { "times": [0.5, 1.5] }
    }] });
    let (o, _) = run(dir.path(), &ok, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn failed_checks_exit_three_and_report_them() {
    let dir = TempDir::new().unwrap();
    let mut cfg = vlasov_config(vec![0.4]);
    cfg["experiments"][0]["controls"]["tolerance"] = json!(1e-30);
    let (o, out) = run(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL vl"));
    let r = bin().arg("report").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stdout).contains("series_direct_gap"));
}

#[test]
fn report_renders_tallies() {
    let dir = TempDir::new().unwrap();
    let (_, out) = run(dir.path(), &json!({ "experiments": [{ "name": "id", "kind": "identities" }] }), &[]);
    let r = bin().arg("report").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.lines().next().unwrap().starts_with("experiment"));
    assert!(text.contains("id"));
    let missing = bin().arg("report").arg(dir.path().join("nowhere")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let o = bin().arg("check").arg(&path).output().unwrap();
            assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n > 0);
}
