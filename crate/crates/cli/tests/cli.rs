use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_excitrans"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DIMER: &str = r#"
temperature = 295.0
reorganization_energy = 35.0
cutoff = 150.0
gamma_recomb = 0.001
correlation_radius = 0.0
couplings = [[0.0, 50.0], [50.0, 0.0]]

[initial_state]
kind = "site"
site = 1

[[sites]]
energy = 100.0
trap_rate = 0.0
fwhm = 0.0

[[sites]]
energy = 0.0
trap_rate = 1.0
fwhm = 0.0
"#;

fn write_model(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_bundled_model() {
    let o = run(&["validate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("schema: ok"));
    assert!(out.contains("sites: 7"));
    assert!(out.contains("generator: ok (49x49)"));
}

#[test]
fn validate_rejects_asymmetric_couplings() {
    let dir = TempDir::new().unwrap();
    let bad = DIMER.replace("[[0.0, 50.0], [50.0, 0.0]]", "[[0.0, 50.0], [40.0, 0.0]]");
    let p = write_model(&dir, "bad.model", &bad);
    let o = run(&["--model", s(&p), "validate"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("schema: FAILED"), "{out}");
    assert!(out.contains('1') && out.contains('2') && out.contains("symmetric"), "{out}");
}

#[test]
fn simulate_writes_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let model = write_model(&dir, "dimer.model", DIMER);
    let out = dir.path().join("traj.csv");
    let o = run(&["--model", s(&model), "--horizon", "20", "--output", s(&out), "simulate", "--dt", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["t", "trace", "p_trap", "p_recomb", "rho_11", "rho_22"]);
    let traces: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(traces.len(), 41);
    assert!((traces[0] - 1.0).abs() < 1e-12);
    assert!(traces.windows(2).all(|w| w[1] <= w[0] + 1e-9));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("traj.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert!(manifest["model_hash"].as_str().is_some_and(|h| text.contains(h)));
}

#[test]
fn malformed_model_leaves_no_output() {
    let dir = TempDir::new().unwrap();
    let model = write_model(&dir, "broken.model", "temperature = \n[[sites]");
    let out = dir.path().join("never.csv");
    let o = run(&["--model", s(&model), "--output", s(&out), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!dir.path().join("never.csv.manifest.json").exists());
}

#[test]
fn contributions_json_sums_to_efficiency() {
    let o = run(&["contributions"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let eta = v["eta"].as_f64().unwrap();
    let reference = v["reference"].as_f64().unwrap();
    let sum: f64 = v["contributions"].as_array().unwrap().iter().map(|c| c["raw"].as_f64().unwrap()).sum();
    assert!((sum + reference - eta).abs() < 1e-9);
    let names: Vec<&str> = v["contributions"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["hamiltonian", "lamb", "relaxation", "dephasing"]);
}

#[test]
fn pathway_scheme_reports_matrix() {
    let o = run(&["contributions", "--scheme", "pathways"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pm = &v["pathways"];
    assert_eq!(pm["n_sites"], 7);
    assert_eq!(pm["jumps"].as_array().unwrap().len(), 7);
    assert_eq!(pm["damping"].as_array().unwrap().len(), 7);
}

#[test]
fn susceptibility_rejects_state_on_trap() {
    let dir = TempDir::new().unwrap();
    let model = write_model(&dir, "ontrap.model", &DIMER.replace("site = 1", "site = 2"));
    let o = run(&["--model", s(&model), "contributions", "--measure", "susceptibility"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("trap site 2"), "{}", stderr(&o));
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let model = write_model(&dir, "dimer.model", DIMER);
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "--model",
        s(&model),
        "--seed",
        "7",
        "--output",
        s(&out),
        "sweep",
        "--parameter",
        "reorganization_energy",
        "--grid",
        "0:20:10",
        "--measures",
        "ete,greens",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("parameter,value,quantity,statistic,result,note"));
    for v in ["0", "10", "20"] {
        assert!(text.contains(&format!("reorganization_energy,{v},eta,central,")), "{text}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "sweep");
}

#[test]
fn sweep_is_reproducible() {
    let args = ["--seed", "11", "sweep", "--parameter", "temperature", "--grid", "100,300", "--samples", "4"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}
