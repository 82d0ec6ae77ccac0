use std::path::{Path, PathBuf};
use std::process::Command as Process;

use monoflow_cli::{
    cmd_decay, cmd_distance, cmd_pullback, cmd_simulate, cmd_verify, run, Command, ExperimentConfig, EXIT_BLOWUP, EXIT_CONFIG, EXIT_DECAY,
    EXIT_PASS, EXIT_VERIFY_FAIL, OUT_ENV,
};

const GOLDEN: f64 = 1.618_033_988_749_895;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("monoflow-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn csv_values(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('t') || text.starts_with("shift"));
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn simulate_golden_reaches_fixed_point() {
    let out = scratch("sim-golden");
    let cfg = config(r#"{"model": {"type": "preset", "name": "golden"}, "horizon": 40, "initial": {"constant": [1.0]}}"#);
    let o = cmd_simulate(&cfg, &out).unwrap();
    assert_eq!(o.exit_code, EXIT_PASS);
    let end = o.summary["end_value"][0].as_f64().unwrap();
    assert!((end - GOLDEN).abs() < 1e-4, "{end}");
    let rows = csv_values(&out.join("trajectory.csv"));
    assert_eq!(rows.last().unwrap()[1], end);
}

#[test]
fn simulate_zero_field_is_constant() {
    let out = scratch("sim-zero");
    let cfg = config(r#"{"model": {"type": "preset", "name": "zero"}, "horizon": 5, "initial": {"constant": [0.3]}}"#);
    cmd_simulate(&cfg, &out).unwrap();
    for row in csv_values(&out.join("trajectory.csv")) {
        assert_eq!(row[1], 0.3);
    }
}

#[test]
fn simulate_unstable_reports_blow_up() {
    let out = scratch("sim-unstable");
    let cfg = config(r#"{"model": {"type": "preset", "name": "unstable-linear"}, "horizon": 200, "solver": {"blowup_cap": 1e9}}"#);
    let o = cmd_simulate(&cfg, &out).unwrap();
    assert_eq!(o.exit_code, EXIT_BLOWUP);
    // growth rate 0.3748: 1e9 is reached after roughly ln(1e9)/0.3748 = 55
    let at = o.summary["blow_up_at"].as_f64().unwrap();
    assert!(at > 40.0 && at < 70.0, "{at}");
}

#[test]
fn pullback_golden_and_linear_limits() {
    for (name, target) in [("golden", GOLDEN), ("linear-quarter", 4.0 / 3.0)] {
        let out = scratch(&format!("pb-{name}"));
        let cfg = config(&format!(r#"{{"model": {{"type": "preset", "name": "{name}"}}, "traces": {{"window": [-70, 4]}}}}"#));
        let o = cmd_pullback(&cfg, &out).unwrap();
        assert_eq!(o.exit_code, EXIT_PASS);
        assert!(o.summary["converged"].as_bool().unwrap());
        assert!(o.summary["monotone_violation"].as_f64().unwrap() <= 1e-8);
        for file in ["u.csv", "v.csv"] {
            for row in csv_values(&out.join(file)) {
                assert!((row[1] - target).abs() < 1e-6, "{name} {file}: {}", row[1]);
            }
        }
    }
}

#[test]
fn pullback_without_steps_echoes_traces() {
    let out = scratch("pb-empty");
    let cfg = config(r#"{"model": {"type": "preset", "name": "golden"}, "traces": {"window": [-30, 2]}, "schedule": {"max_steps": 0}}"#);
    assert_eq!(cmd_pullback(&cfg, &out).unwrap().exit_code, EXIT_PASS);
    let read = |f: &str| std::fs::read_to_string(out.join(f)).unwrap();
    assert_eq!(read("u.csv"), read("sub.csv"));
    assert_eq!(read("v.csv"), read("super.csv"));
}

#[test]
fn verify_suites() {
    let cases = [
        (r#"{"model": {"type": "preset", "name": "golden"}, "suite": "kamke"}"#, EXIT_PASS),
        (r#"{"model": {"type": "preset", "name": "anti-monotone"}, "suite": "kamke"}"#, EXIT_VERIFY_FAIL),
        (r#"{"model": {"type": "preset", "name": "null-alpha"}, "suite": "assumptions-A"}"#, EXIT_VERIFY_FAIL),
        (r#"{"model": {"type": "preset", "name": "cyclic-golden"}, "suite": "assumptions-B"}"#, EXIT_PASS),
        (r#"{"model": {"type": "preset", "name": "golden"}, "suite": "conditions"}"#, EXIT_PASS),
    ];
    for (i, (json, code)) in cases.iter().enumerate() {
        let o = cmd_verify(&config(json), &scratch(&format!("verify-{i}"))).unwrap();
        assert_eq!(o.exit_code, *code, "{json}");
    }
    let o = cmd_verify(&config(cases[1].0), &scratch("verify-witness")).unwrap();
    let ky = &o.summary["report"][1];
    assert_eq!(ky["condition"], "Ky");
    assert!(ky["witness"].is_object());
    let o = cmd_verify(&config(cases[2].0), &scratch("verify-a1")).unwrap();
    let a1 = o.summary["report"]["entries"].as_array().unwrap().iter().find(|e| e["name"] == "A1").unwrap();
    assert_eq!(a1["verdict"], "fail");
}

#[test]
fn distance_to_itself_and_to_translates() {
    let out = scratch("dist-self");
    let cfg = config(
        r#"{"model": {"type": "preset", "name": "quasi-periodic"}, "distance": {"other": {"type": "preset", "name": "quasi-periodic"}}}"#,
    );
    let o = cmd_distance(&cfg, &out).unwrap();
    assert_eq!(o.summary["value"].as_f64().unwrap(), 0.0);

    let out = scratch("dist-dyadic");
    let cfg = config(r#"{"model": {"type": "preset", "name": "step-coefficient"}, "distance": {"dyadic_levels": 6}, "seed": 3}"#);
    cmd_distance(&cfg, &out).unwrap();
    let rows = csv_values(&out.join("distance_series.csv"));
    assert_eq!(rows.len(), 7);
    for w in rows.windows(2) {
        assert!(w[1][1] < w[0][1], "{:?}", rows);
    }
}

#[test]
fn decay_of_pure_relaxation_and_of_unstable_fixture() {
    let out = scratch("decay-ode");
    let cfg = config(
        r#"{"model": {"type": "scalar_population",
             "alpha": {"kind": "constant", "value": 1.0},
             "beta": {"kind": "constant", "value": 0.0},
             "gamma": {"kind": "constant", "value": 1.0},
             "h": {"base": {"kind": "constant", "value": 1.0}, "gain": {"kind": "constant", "value": 0.0}, "shape": "identity"}},
            "decay": {"horizon": 30}}"#,
    );
    let o = cmd_decay(&cfg, &out).unwrap();
    assert_eq!(o.exit_code, EXIT_PASS);
    let delta = o.summary["estimate"]["delta"].as_f64().unwrap();
    assert!((0.99..=1.01).contains(&delta), "{delta}");

    let cfg = config(r#"{"model": {"type": "preset", "name": "unstable-linear"}, "decay": {"horizon": 30}}"#);
    assert_eq!(cmd_decay(&cfg, &scratch("decay-unstable")).unwrap().exit_code, EXIT_DECAY);
}

#[test]
fn config_errors_are_rejected() {
    for json in [
        r#"{"modle": {}}"#,
        r#"{"horizon": -1}"#,
        r#"{"solver": {"h": 0.3}}"#,
        r#"{"model": {"type": "scalar_population", "alpha": {"kind": "constant", "value": -1}}}"#,
    ] {
        let e = ExperimentConfig::from_json(json).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG, "{json}");
    }
    let cfg = config(r#"{"model": {"type": "preset", "name": "missing"}}"#);
    assert_eq!(cmd_simulate(&cfg, &scratch("missing")).unwrap_err().exit_code(), EXIT_CONFIG);
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let cfg = config(
        r#"{"model": {"type": "preset", "name": "step-coefficient"}, "suite": "monotonicity", "seed": 11, "harness": {"trials": 12, "horizon": 4}}"#,
    );
    let a = scratch("det-a");
    let b = scratch("det-b");
    run(Command::Verify, &cfg, &a, Some(1)).unwrap();
    run(Command::Verify, &cfg, &b, Some(4)).unwrap();
    assert_eq!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(b.join("report.json")).unwrap());
}

#[test]
fn binary_honours_flags_and_out_env() {
    let dir = scratch("bin");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("sim.json");
    std::fs::write(&cfg, r#"{"model": {"type": "preset", "name": "golden"}, "horizon": 3}"#).unwrap();
    let env_out = dir.join("from-env");
    let status = Process::new(env!("CARGO_BIN_EXE_monoflow"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.join("from-flag"))
        .args(["--jobs", "2", "--seed", "5"])
        .env(OUT_ENV, &env_out)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(env_out.join("trajectory.csv").exists());
    assert!(!dir.join("from-flag").exists());

    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let status = Process::new(env!("CARGO_BIN_EXE_monoflow")).args(["decay", "--config"]).arg(&bad).env_remove(OUT_ENV).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
