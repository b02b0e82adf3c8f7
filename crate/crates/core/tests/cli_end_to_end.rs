use std::fs;
use std::path::Path;

use netcert::cli::{run, EXIT_DATA, EXIT_OK, EXIT_UNKNOWN, EXIT_USAGE};
use netcert::datadriven::io::load_dataset;
use netcert::truthoracle::{generate_experiment, random_cycle_system, ExperimentConfig, NoiseModel};

fn netcert(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run(std::iter::once("netcert").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const CYCLE: &str = r#"{"system": {"kind": "random_cycle", "vertices": 3, "seed": 4},
  "experiment": {"samples": 40, "sigmas": [0.05], "noise": "interval", "seed": 9}}"#;

#[test]
fn gen_data_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", CYCLE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(netcert(&["gen-data", "--config", &cfg, "--out", a.to_str().unwrap()]).0, EXIT_OK);
    assert_eq!(netcert(&["gen-data", "--config", &cfg, "--out", b.to_str().unwrap()]).0, EXIT_OK);
    for f in ["manifest.json", "sub_0.csv", "sub_1.csv", "sub_2.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ds = load_dataset(&a.join("manifest.json")).unwrap();
    let sys = random_cycle_system(3, (0.0, 1.0), (0.0, 0.1), 4).unwrap();
    let e = generate_experiment(&sys, &ExperimentConfig::new(40, 0.05, NoiseModel::Interval, 9)).unwrap();
    assert_eq!(ds.lumped().unwrap(), e.simulation.data);
    assert_eq!(ds.subsystems().unwrap(), e.subsystems);
    for (i, sub) in e.subsystems.iter().enumerate() {
        assert_eq!(ds.bound(sub.own.n(), None).unwrap(), e.subsystem_bounds[i]);
    }
}

#[test]
fn zero_noise_level_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", &CYCLE.replace("[0.05]", "[0.0]"));
    assert_eq!(netcert(&["gen-data", "--config", &cfg, "--out", dir.path().to_str().unwrap()]).0, EXIT_USAGE);
}

#[test]
fn empty_data_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sub_0.csv", "");
    write(
        dir.path(),
        "manifest.json",
        r#"{"files": ["sub_0.csv"], "noise": {"kind": "energy", "sigma": 0.1, "N": 10}}"#,
    );
    let cfg = write(dir.path(), "a.json", r#"{"data": "manifest.json"}"#);
    assert_eq!(netcert(&["analyze", "--config", &cfg]).0, EXIT_DATA);
}

#[test]
fn analyze_from_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", CYCLE);
    let data = dir.path().join("data");
    netcert(&["gen-data", "--config", &cfg, "--out", data.to_str().unwrap()]);
    let acfg = write(dir.path(), "a.json", r#"{"data": "data/manifest.json"}"#);
    let out = dir.path().join("out");
    let (code, _) = netcert(&["analyze", "--config", &acfg, "--out", out.to_str().unwrap(), "--mode", "structured"]);
    assert_eq!(code, EXIT_OK);
    let csv = fs::read_to_string(out.join("analyze.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sigma,mode,gamma,status,gamma_true");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0.05,structured,"));
    assert!(lines[1].contains(",certified,"));
}

#[test]
fn example1_sweep_has_eleven_rows_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    let sigmas: Vec<String> = (0..11).map(|k| format!("{}", 0.04 + 0.021 * k as f64)).collect();
    let cfg = write(
        dir.path(),
        "a.json",
        &format!(r#"{{"system": {{"kind": "example1"}}, "experiment": {{"sigmas": [{}], "seed": 3}}}}"#, sigmas.join(",")),
    );
    let out = dir.path().join("out");
    let (code, _) = netcert(&["analyze", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(code == EXIT_OK || code == EXIT_UNKNOWN, "{code}");
    let csv = fs::read_to_string(out.join("analyze.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 22);
    for r in rows.iter().filter(|r| r[3] == "certified") {
        let g: f64 = r[2].parse().unwrap();
        let g0: f64 = r[4].parse().unwrap();
        assert!(g >= g0 - 1e-6);
    }
    // Overwritten, not appended, on a second run.
    netcert(&["analyze", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(out.join("analyze.csv")).unwrap(), csv);
}

#[test]
fn synth_reports_and_unknown_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", CYCLE);
    let out = dir.path().join("out");
    let (code, _) = netcert(&["synth", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("synth.json")).unwrap()).unwrap();
    let run0 = &v["runs"][0];
    assert_eq!(run0["status"], "feasible");
    assert_eq!(run0["result"]["controller_link_dims"], serde_json::json!([3, 3, 3]));
    assert!(run0["gamma"].as_f64().unwrap() > 1.0 - 1e-3);

    // z contains w directly, so no level below 1 is certifiable.
    let low = write(
        dir.path(),
        "low.json",
        &CYCLE.replace(r#""seed": 9}"#, r#""seed": 9}, "synthesis": {"gamma_interval": [0.1, 0.5]}"#),
    );
    assert_eq!(netcert(&["synth", "--config", &low]).0, EXIT_UNKNOWN);
}

#[test]
fn alpha_grid_flag_never_worse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", CYCLE);
    let gamma = |flag: &str| -> f64 {
        let out = dir.path().join(flag);
        netcert(&["synth", "--config", &cfg, "--out", out.to_str().unwrap(), "--alpha-grid", flag]);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("synth.json")).unwrap()).unwrap();
        v["runs"][0]["gamma"].as_f64().unwrap()
    };
    let (d, e) = (gamma("default"), gamma("extended"));
    assert!(e <= d * (1.0 + 2e-3), "{e} vs {d}");
}
