mod common;

use std::path::Path;

use common::{molcomm, preset, preset_with, stdout};
use molcomm_cli::ExperimentConfig;

/// Data rows of a CSV output as string cells, header comment and column row skipped.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# molcomm "));
    let columns = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (columns, rows)
}

#[test]
fn moments_row_is_the_library_value() {
    let out = molcomm(&["moments", "--config", preset("capacity.preset").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (columns, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 1);
    let field = |name: &str| -> f64 {
        let i = columns.iter().position(|c| c == name).unwrap();
        rows[0][i].parse().unwrap()
    };
    let config = ExperimentConfig::parse(&std::fs::read_to_string(preset("capacity.preset")).unwrap())
        .unwrap()
        .resolve()
        .unwrap();
    let y = config.link().unwrap().receiver_output_moments(config.p0).unwrap();
    assert_eq!(field("mean_y"), y.mean);
    assert_eq!(field("var_y"), y.variance);
}

#[test]
fn capacity_sweep_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_with(dir.path(), "capacity.preset", &[("levels", "21"), ("bins", "200"), ("max_iter", "300")]);
    let out = molcomm(&["capacity-sweep", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (columns, rows) = csv_rows(&stdout(&out));
    assert_eq!(&columns[..7], ["n", "p_max", "K", "B", "capacity_bits", "iterations", "gap"]);
    assert_eq!(rows.len(), 60);
    for row in &rows {
        assert_eq!((row[2].as_str(), row[3].as_str()), ("21", "200"));
        let c: f64 = row[4].parse().unwrap();
        assert!(c > 0.0 && c <= 21f64.log2());
    }
}

#[test]
fn modulation_and_feasibility_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_with(
        dir.path(),
        "modulation.preset",
        &[("m_list", "[2, 4]"), ("p_max_grid", "[0.3, 0.8]"), ("bins", "300")],
    );
    let cfg = cfg.to_str().unwrap();
    let out = molcomm(&["modulation-sweep", "--config", cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (columns, rows) = csv_rows(&stdout(&out));
    assert_eq!(columns, ["m", "p_max", "rate_bits", "total_error", "pe_0", "pe_1", "pe_2", "pe_3"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "2");
    assert_eq!(rows[0][6], "");
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), 0.0);

    let out = molcomm(&["feasibility", "--config", cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (columns, rows) = csv_rows(&stdout(&out));
    assert_eq!(columns, ["n", "m", "target_error", "p_max_cap", "status", "p_max", "total_error"]);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[4] == "feasible"));
}

#[test]
fn noiseless_validation_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_with(dir.path(), "validation.preset", &[("gain_noise_rel_var", "0.0"), ("trials", "20000")]);
    let out = molcomm(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (columns, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 15);
    let checks: Vec<usize> = ["mean_check", "variance_check"]
        .iter()
        .map(|c| columns.iter().position(|x| x == c).unwrap())
        .collect();
    assert!(rows.iter().all(|r| checks.iter().all(|&i| r[i] == "PASS")));
}

#[test]
fn failed_validation_exits_three() {
    let out = molcomm(&[
        "validate",
        "--config",
        preset("capacity.preset").to_str().unwrap(),
        "--mode",
        "paper-literal",
        "--trials",
        "2000",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn config_errors_exit_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "bacteria = 10\n# note\nrecptors = 50\n").unwrap();
    let out = molcomm(&["moments", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("recptors"), "{err}");

    std::fs::write(&bad, "gain_noise_rel_var = 0.3\n").unwrap();
    let out = molcomm(&["moments", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(molcomm(&["moments", "--sed", "3"]).status.code(), Some(2));
    assert_eq!(molcomm(&["moments", "--mode", "literal"]).status.code(), Some(2));
    assert_eq!(molcomm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(molcomm(&["moments", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
    assert_eq!(molcomm(&["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_the_config_file() {
    let out = molcomm(&[
        "moments",
        "--config",
        preset("capacity.preset").to_str().unwrap(),
        "--seed",
        "99",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 99);
    assert_eq!(v["config"]["production"].as_f64(), Some(0.3));
    assert_eq!(v["columns"][0], "p0");
    assert!(v["rows"][0]["var_y"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_files_rerun_to_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_with(dir.path(), "validation.preset", &[("trials", "4000"), ("p0_grid", "[0.2, 0.6]")]);
    for format in ["csv", "json"] {
        let first = dir.path().join(format!("first.{format}"));
        let second = dir.path().join(format!("second.{format}"));
        let run = |config: &Path, out: &Path| {
            molcomm(&[
                "validate",
                "--config",
                config.to_str().unwrap(),
                "--format",
                format,
                "--out",
                out.to_str().unwrap(),
            ])
        };
        assert_ne!(run(&cfg, &first).status.code(), Some(2));
        // the output file is itself a config
        let rerun = molcomm(&["validate", "--config", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
        assert_ne!(rerun.status.code(), Some(2), "{}", String::from_utf8_lossy(&rerun.stderr));
        let read = |p: &Path| std::fs::read_to_string(p).unwrap();
        assert!(read(&first) == read(&second), "{format} re-run differs:\n{}\n{}", read(&first), read(&second));
    }
}

#[test]
fn thread_count_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_with(dir.path(), "capacity.preset", &[("levels", "15"), ("bins", "120"), ("trials", "3000")]);
    let cfg = cfg.to_str().unwrap();
    for command in ["validate", "capacity-sweep"] {
        let outputs: Vec<Vec<u8>> = ["1", "2", "5"]
            .iter()
            .map(|t| molcomm(&[command, "--config", cfg, "--threads", t]).stdout)
            .collect();
        assert!(!outputs[0].is_empty());
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{command}");
    }
}
