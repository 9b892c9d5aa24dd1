//! CLI behavior: exit codes, error reporting, file handling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn zplkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zplkit"))
        .args(args)
        .output()
        .expect("spawn zplkit")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn usage_errors_exit_2() {
    let out = zplkit(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    let out = zplkit(&["fc-table"]); // missing required --s
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_1_with_json_report() {
    let dir = tmp_dir("cli_errors");
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "tau_ns,g2\n0.5,oops\n").unwrap();
    let out = zplkit(&[
        "g2-fit",
        "--in",
        bad.to_str().unwrap(),
        "--out",
        dir.join("x.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr is a JSON report");
    assert_eq!(report["error"], "parse");
    assert_eq!(report["line"], 2);

    let out = zplkit(&[
        "g2-fit",
        "--in",
        dir.join("missing.csv").to_str().unwrap(),
        "--out",
        dir.join("x.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(report["error"], "io");
}

#[test]
fn fc_table_matches_poisson_weights() {
    let out = zplkit(&["fc-table", "--s", "1", "--n-max", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,n,n_star,franck_condon"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    let e = (-1.0f64).exp();
    let expected = [e, e, e / 2.0, e / 6.0];
    assert_eq!(values.len(), expected.len());
    for (v, x) in values.iter().zip(expected) {
        assert!((v - x).abs() < 1e-12);
    }
}

#[test]
fn fc_table_adaptive_rows_complete() {
    // without --n-max the rows extend until they sum to 1
    let out = zplkit(&["fc-table", "--s", "2", "--n-star-max", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut sums = [0.0f64; 2];
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let n_star: usize = fields[2].parse().unwrap();
        sums[n_star] += fields[3].parse::<f64>().unwrap();
    }
    for (n_star, sum) in sums.iter().enumerate() {
        assert!((sum - 1.0).abs() <= 1e-6, "row n*={n_star} sums to {sum}");
    }
}

#[test]
fn calibrate_then_apply_through_files() {
    let dir = tmp_dir("cli_calibrate");
    let mut csv = String::from("wavelength_nm,theta_true_deg,theta_measured_deg,visibility\n");
    for &lam in &[550.0, 650.0, 740.0] {
        for &theta in &[0.0, 30.0, 60.0, 90.0, 120.0, 150.0] {
            csv.push_str(&format!("{lam},{theta},{},0.92\n", theta + 4.0));
        }
    }
    let input = dir.join("measurements.csv");
    std::fs::write(&input, csv).unwrap();
    let map_path = dir.join("map.json");
    let out = zplkit(&[
        "calibrate",
        "--in",
        input.to_str().unwrap(),
        "--out",
        map_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let map = zplkit::io::read_calibration_map_json(&map_path).unwrap();
    let corrected = zplkit::polarfit::apply_calibration(52.0, 600.0, &map).unwrap();
    assert!((corrected.theta_true_deg - 48.0).abs() < 1e-6);
}

#[test]
fn survey_histogram_masses_sum_to_record_count() {
    let dir = tmp_dir("cli_survey");
    let records_path = dir.join("records.jsonl");
    // produce records through simulate's survey job
    let scenario = dir.join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{
            "name": "records",
            "jobs": [{
                "kind": "survey",
                "label": "records",
                "n_defects": 103,
                "noise": { "seed": 9, "kind": "poisson" }
            }]
        }"#,
    )
    .unwrap();
    let out = zplkit(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = zplkit(&[
        "survey",
        "--in",
        records_path.to_str().unwrap(),
        "--bin",
        "5",
        "--out-scatter",
        dir.join("scatter.csv").to_str().unwrap(),
        "--out-hist",
        dir.join("hist.csv").to_str().unwrap(),
        "--out-summary",
        dir.join("summary.json").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let hist = std::fs::read_to_string(dir.join("hist.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 103);
    let scatter = std::fs::read_to_string(dir.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 104); // header + one row per record
}

#[test]
fn config_file_supplies_output_directory() {
    let dir = tmp_dir("cli_config");
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        format!(
            "{{\"out_dir\": {:?}, \"prominence\": 0.05}}",
            dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = zplkit(&[
        "--config",
        config.to_str().unwrap(),
        "fc-table",
        "--s",
        "1",
        "--n-max",
        "2",
        "--out",
        "table.csv",
    ]);
    assert!(out.status.success());
    assert!(dir.join("table.csv").exists(), "relative path resolves to out_dir");
}

#[test]
fn env_var_supplies_default_output_directory() {
    let dir = tmp_dir("cli_env");
    let out = Command::new(env!("CARGO_BIN_EXE_zplkit"))
        .env("ZPLKIT_OUT_DIR", &dir)
        .args(["fc-table", "--s", "0.5", "--n-max", "2", "--out", "env_table.csv"])
        .output()
        .expect("spawn zplkit");
    assert!(out.status.success());
    assert!(dir.join("env_table.csv").exists());
}

#[test]
fn bundled_scenarios_resolve_without_files() {
    let dir = tmp_dir("cli_bundled");
    for name in ["fig3", "fig5.json"] {
        let out = zplkit(&[
            "simulate",
            "--scenario",
            name,
            "--out-dir",
            dir.join(name.replace(".json", "")).to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{name} failed");
    }
    assert!(dir.join("fig3").join("fig3_emission.csv").exists());
    assert!(dir.join("fig5").join("fig5_abs_473.csv").exists());
    let metadata: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("fig5").join("fig5_metadata.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(metadata["rng"], "chacha12");
    assert_eq!(metadata["jobs"][2]["excitation_nm"], 473.0);
}

#[test]
fn band_emits_svg_behind_flag() {
    let dir = tmp_dir("cli_svg");
    zplkit(&[
        "simulate",
        "--scenario",
        "fig3",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    let out = zplkit(&[
        "band",
        "--in",
        dir.join("fig3_emission.csv").to_str().unwrap(),
        "--out",
        dir.join("wde.csv").to_str().unwrap(),
        "--svg",
        dir.join("wde.svg").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(dir.join("wde.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
    // without the flag no SVG is written
    assert!(!dir.join("other.svg").exists());
}
