//! End-to-end checks of the command-line surface: exit codes, file
//! artifacts, manifests and the ingest path.

use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sheforge_core::io::read_angle_table_csv;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sheforge"));
    cmd.env_remove("SHEFORGE_SEED");
    cmd
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sheforge_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn solve_writes_json_and_manifest() {
    let dir = workdir("solve");
    let out = dir.join("sol.json");
    run_ok(bin()
        .args(["solve", "--m", "0.8", "--s", "4", "--harmonics", "5,7,11"])
        .arg("--out")
        .arg(&out));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["converged"], true);
    assert!(json["residual_norm"].as_f64().unwrap() < 1e-10);
    assert_eq!(json["angles_deg"].as_array().unwrap().len(), 4);

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("sol.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["seed"], 42);
}

#[test]
fn infeasible_m_exits_one_with_machine_line() {
    let dir = workdir("infeasible");
    let out = bin()
        .args(["solve", "--m", "1.5"])
        .arg("--out")
        .arg(dir.join("x.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("sheforge: error kind=infeasible"), "{stderr}");
    assert_eq!(stderr.lines().count(), 1);
}

#[test]
fn usage_error_exits_two() {
    let out = bin().args(["solve", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_row_count_and_round_trip() {
    let dir = workdir("sweep");
    let out = dir.join("table.csv");
    run_ok(bin()
        .args(["sweep", "--from", "0.6", "--to", "0.9", "--step", "0.01"])
        .arg("--out")
        .arg(&out));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "m,theta1_deg,theta2_deg,theta3_deg,theta4_deg,thd_pct"
    );
    assert_eq!(lines.count(), 31);

    // ingest(write(table)) preserves every row
    let table = read_angle_table_csv(BufReader::new(text.as_bytes())).unwrap();
    assert_eq!(table.rows.len(), 31);
    // the audit sidecar exists and carries the same number of rows
    let audit: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("table.audit.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(audit["rows"].as_array().unwrap().len(), 31);
}

#[test]
fn audit_flags_reference_table() {
    let dir = workdir("audit");
    let table = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/reference_angle_table.csv");
    let out = dir.join("report.json");
    run_ok(bin()
        .arg("audit")
        .arg("--table")
        .arg(&table)
        .arg("--out")
        .arg(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[1]["m"], 8.81);
    assert!(rows[1]["flags"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f == "m_out_of_range"));
}

#[test]
fn audit_of_empty_table_succeeds() {
    let dir = workdir("audit_empty");
    let table = dir.join("empty.csv");
    std::fs::write(
        &table,
        "m,theta1_deg,theta2_deg,theta3_deg,theta4_deg,thd_pct\n",
    )
    .unwrap();
    let out = dir.join("report.json");
    run_ok(bin()
        .arg("audit")
        .arg("--table")
        .arg(&table)
        .arg("--out")
        .arg(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["rows"].as_array().unwrap().is_empty());
}

#[test]
fn train_predict_cycle() {
    let dir = workdir("train");
    let table = dir.join("table.csv");
    run_ok(bin()
        .args(["sweep", "--from", "0.76", "--to", "0.82", "--step", "0.005"])
        .arg("--out")
        .arg(&table));
    let model = dir.join("model.json");
    run_ok(bin()
        .args(["train", "--epochs", "3000", "--lr", "1.0"])
        .arg("--table")
        .arg(&table)
        .arg("--out")
        .arg(&model));
    let pred = dir.join("pred.json");
    run_ok(bin()
        .args(["predict", "--m", "0.79"])
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&pred));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&pred).unwrap()).unwrap();
    assert_eq!(json["extrapolated"], false);
    assert_eq!(json["angles_deg"].as_array().unwrap().len(), 4);

    // out-of-range prediction fails unless extrapolation is allowed
    let out = bin()
        .args(["predict", "--m", "0.3"])
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(dir.join("bad.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind=extrapolation"));
}

#[test]
fn simulate_and_spectrum_cross_check() {
    let dir = workdir("simulate");
    let trace = dir.join("trace.csv");
    run_ok(bin()
        .args([
            "simulate",
            "--mode",
            "she",
            "--angles-deg",
            "9.84,20.38,38.41,60.42",
            "--cycles",
            "4",
        ])
        .arg("--out")
        .arg(&trace));
    let spec = dir.join("spec.csv");
    run_ok(bin()
        .args(["spectrum", "--max-order", "49"])
        .arg("--input")
        .arg(&trace)
        .arg("--out")
        .arg(&spec));
    let text = std::fs::read_to_string(&spec).unwrap();
    let footer = text.lines().last().unwrap();
    assert!(footer.starts_with("# thd_pct="), "{footer}");
    let thd: f64 = footer
        .strip_prefix("# thd_pct=")
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    // close to the analytic value for these angles
    assert!((thd - 8.65).abs() < 0.2, "thd = {thd}");
}

#[test]
fn pi_simulation_and_current_spectrum() {
    let dir = workdir("pi");
    let trace = dir.join("pi.csv");
    run_ok(bin()
        .args([
            "simulate", "--mode", "pi", "--vref", "25", "--cycles", "12", "--sample-rate",
            "100000",
        ])
        .arg("--out")
        .arg(&trace));
    // the current channel analyzes the same way as the voltage channel
    let spec = dir.join("ispec.csv");
    run_ok(bin()
        .args(["spectrum", "--column", "i_out_A", "--max-order", "13"])
        .arg("--input")
        .arg(&trace)
        .arg("--out")
        .arg(&spec));
    let text = std::fs::read_to_string(&spec).unwrap();
    // fundamental current near v1/R after settling
    let h1: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(h1 > 0.2 && h1 < 0.45, "fundamental current {h1} A");
}

#[test]
fn seed_env_fallback_is_recorded() {
    let dir = workdir("seedenv");
    let out = dir.join("sol.json");
    run_ok(bin()
        .env("SHEFORGE_SEED", "777")
        .args(["solve", "--m", "0.8"])
        .arg("--out")
        .arg(&out));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("sol.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 777);
}

#[test]
fn custom_config_json_is_honored() {
    let dir = workdir("config");
    let config = dir.join("five_level.json");
    std::fs::write(
        &config,
        r#"{"s":2,"vdc":[15.0,15.0],"f0":50.0,"carrier_freq":5000.0,"load_resistance":50.0}"#,
    )
    .unwrap();
    let trace = dir.join("trace.csv");
    run_ok(bin()
        .args(["simulate", "--mode", "spwm", "--m", "1.0", "--cycles", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&trace));
    let (v, _) = sheforge_core::io::read_samples_csv(
        BufReader::new(std::fs::File::open(&trace).unwrap()),
        "v_out_V",
    )
    .unwrap();
    let peak = v.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    assert_eq!(peak, 30.0);
    // the current column reflects the 50 ohm load
    let (i, _) = sheforge_core::io::read_samples_csv(
        BufReader::new(std::fs::File::open(&trace).unwrap()),
        "i_out_A",
    )
    .unwrap();
    let ipeak = i.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    assert_eq!(ipeak, 0.6);

    // a config violating its invariants is rejected up front
    std::fs::write(&config, r#"{"s":2,"vdc":[15.0],"f0":50.0,"carrier_freq":5000.0,"load_resistance":50.0}"#).unwrap();
    let out = bin()
        .args(["simulate", "--mode", "spwm", "--m", "1.0", "--cycles", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("bad.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plot_emits_svg() {
    let dir = workdir("plot");
    let table = dir.join("table.csv");
    run_ok(bin()
        .args(["sweep", "--from", "0.78", "--to", "0.8", "--step", "0.01"])
        .arg("--out")
        .arg(&table));
    for kind in ["angles", "thd"] {
        let svg = dir.join(format!("{kind}.svg"));
        run_ok(bin()
            .args(["plot", "--kind", kind])
            .arg("--input")
            .arg(&table)
            .arg("--out")
            .arg(&svg));
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg "));
        assert!(text.trim_end().ends_with("</svg>"));
    }

    let trace = dir.join("trace.csv");
    run_ok(bin()
        .args([
            "simulate",
            "--mode",
            "she",
            "--angles-deg",
            "9.84,20.38,38.41,60.42",
            "--cycles",
            "2",
        ])
        .arg("--out")
        .arg(&trace));
    let spec = dir.join("spec.csv");
    run_ok(bin()
        .args(["spectrum", "--max-order", "25"])
        .arg("--input")
        .arg(&trace)
        .arg("--out")
        .arg(&spec));
    for (kind, input) in [("waveform", &trace), ("spectrum", &spec)] {
        let svg = dir.join(format!("{kind}.svg"));
        run_ok(bin()
            .args(["plot", "--kind", kind])
            .arg("--input")
            .arg(input)
            .arg("--out")
            .arg(&svg));
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg "));
    }
}
