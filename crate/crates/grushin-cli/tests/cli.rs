//! End-to-end runs of the binary: artifact round trips, exit-code
//! contracts, and determinism of the verification report.

use grushin::spectral::eigenmode;
use grushin::{GridFunction, GrushinConfig, MultiIndex};
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grushin"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("grushin-cli-{tag}"));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small geometry: fine enough that the sampled eigenmode is numerically
/// inside the trusted band, cheap enough for per-test plan builds.
fn tiny_config() -> Arc<GrushinConfig> {
    Arc::new(
        serde_json::from_value(serde_json::json!({
            "version": 1,
            "d_prime": 1,
            "d_doubleprime": 1,
            "homogeneous_dimension": 3,
            "hermite_cutoff": 8,
            "x_prime_grid": {"half_width": 10.0, "points": 48},
            "x_doubleprime_grid": {"half_width": 8.0, "points": 32},
            "tolerances": {}
        }))
        .unwrap(),
    )
}

fn write_tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, tiny_config().to_json_string()).unwrap();
    path
}

/// k = 2 mode at the third positive frequency: exactly band-limited, with
/// eigenvalue theta = 5 * 3 pi / 8.
fn sample_mode(dir: &Path) -> (PathBuf, GridFunction, f64) {
    let cfg = tiny_config();
    let xi = 3.0 * std::f64::consts::PI / 8.0;
    let f = eigenmode(cfg, &MultiIndex::new(vec![2]), &[xi]).unwrap();
    let path = dir.join("mode.csv");
    grushin::io::write_grid_csv(&f, File::create(&path).unwrap()).unwrap();
    let theta = 5.0 * xi;
    (path, f, theta)
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn transform_round_trip_preserves_the_mode() {
    let dir = scratch("round-trip");
    let config = write_tiny_config(&dir);
    let (input, f, _) = sample_mode(&dir);

    let fwd = bin()
        .args(["transform", "forward", "--in"])
        .arg(&input)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("dual.csv"))
        .output()
        .unwrap();
    assert_exit(&fwd, 0);
    let summary = stdout_json(&fwd);
    let ratio = summary["norm_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 1e-9, "norm ratio {ratio}");

    let inv = bin()
        .args(["transform", "inverse", "--in"])
        .arg(dir.join("dual.csv"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("back.csv"))
        .output()
        .unwrap();
    assert_exit(&inv, 0);

    let back =
        grushin::io::read_grid_csv(tiny_config(), File::open(dir.join("back.csv")).unwrap())
            .unwrap();
    let worst = f
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-9, "max pointwise deviation {worst}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn transform_binary_pair_round_trips() {
    let dir = scratch("binary");
    let config = write_tiny_config(&dir);
    let (input, f, _) = sample_mode(&dir);

    let fwd = bin()
        .args(["transform", "forward", "--in"])
        .arg(&input)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("dual.json"))
        .output()
        .unwrap();
    assert_exit(&fwd, 0);
    assert!(dir.join("dual.bin").is_file(), "missing binary data file");

    let inv = bin()
        .args(["transform", "inverse", "--in"])
        .arg(dir.join("dual.json"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("back.json"))
        .output()
        .unwrap();
    assert_exit(&inv, 0);

    let back = grushin::io::read_grid_binary(&dir.join("back.json")).unwrap();
    let worst = f
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-9, "max pointwise deviation {worst}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_config_exits_2() {
    let dir = scratch("bad-config");
    let path = dir.join("config.json");
    // homogeneous dimension inconsistent with the factor dimensions
    std::fs::write(
        &path,
        r#"{"version":1,"d_prime":1,"d_doubleprime":1,"homogeneous_dimension":5,
            "hermite_cutoff":8,"x_prime_grid":{"half_width":10.0,"points":48},
            "x_doubleprime_grid":{"half_width":8.0,"points":32},"tolerances":{}}"#,
    )
    .unwrap();
    let (input, _, _) = sample_mode(&dir);
    let out = bin()
        .args(["transform", "forward", "--in"])
        .arg(&input)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap();
    assert_exit(&out, 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = scratch("unknown-key");
    let path = dir.join("config.json");
    let mut value: serde_json::Value =
        serde_json::from_str(&tiny_config().to_json_string()).unwrap();
    value["surprise"] = serde_json::json!(1);
    std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
    let out = bin()
        .args(["verify", "--only", "special", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_exit(&out, 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_input_exits_1() {
    let out = bin()
        .args(["transform", "forward", "--in", "does-not-exist.csv"])
        .output()
        .unwrap();
    assert_exit(&out, 1);
}

#[test]
fn evolve_contracts_like_the_eigenvalue() {
    let dir = scratch("evolve");
    let config = write_tiny_config(&dir);
    let (input, _, theta) = sample_mode(&dir);
    let out_dir = dir.join("flow");
    let out = bin()
        .args(["evolve", "--t", "0.1,0.2,0.4", "--symbol", "heat", "--in"])
        .arg(&input)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_reader(File::open(out_dir.join("report.json")).unwrap()).unwrap();
    let stages = report["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 3);
    for (stage, t) in stages.iter().zip([0.1, 0.2, 0.4]) {
        let ratio = stage["contraction_ratio"].as_f64().unwrap();
        let expected = (-t * theta).exp();
        assert!(
            (ratio - expected).abs() < 1e-6,
            "t = {t}: ratio {ratio}, eigenvalue predicts {expected}"
        );
        let file = out_dir.join(stage["file"].as_str().unwrap());
        assert!(file.is_file(), "missing {}", file.display());
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn evolve_rejects_negative_time_with_exit_2() {
    let dir = scratch("evolve-neg");
    let (input, _, _) = sample_mode(&dir);
    let out = bin()
        .args(["evolve", "--t", "-1", "--in"])
        .arg(&input)
        .output()
        .unwrap();
    assert_exit(&out, 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn kernel_methods_agree_and_slice_has_requested_rows() {
    let dir = scratch("kernel");
    let mut values = Vec::new();
    for method in ["fourier", "hankel"] {
        let out = bin()
            .args([
                "kernel", "--t", "0.7", "--x", "0.4,0.1", "--y", "-0.3,0.5", "--method", method,
            ])
            .output()
            .unwrap();
        assert_exit(&out, 0);
        let text = String::from_utf8(out.stdout).unwrap();
        let row = text.lines().nth(1).unwrap();
        let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(value > 0.0, "{method} kernel value {value}");
        values.push(value);
    }
    assert!(
        (values[0] - values[1]).abs() <= 1e-8 * values[0].abs(),
        "fourier {} vs hankel {}",
        values[0],
        values[1]
    );

    let slice_path = dir.join("slice.csv");
    let out = bin()
        .args([
            "kernel",
            "--t",
            "0.7",
            "--x",
            "0.4,0.0",
            "--y",
            "0.4,0.0",
            "--method",
            "fourier",
            "--grid-slice",
            "y_doubleprime_0=-3:3:7",
        ])
        .arg("--out")
        .arg(&slice_path)
        .output()
        .unwrap();
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(&slice_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "y_doubleprime_0,p_t");
    assert_eq!(lines.len(), 8);
    // same |y'' - x''| on both sides of the diagonal
    let value = |line: &str| line.rsplit(',').next().unwrap().parse::<f64>().unwrap();
    assert!((value(lines[1]) - value(lines[7])).abs() < 1e-12);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_reports_are_deterministic_and_scale_failures_exit_3() {
    let dir = scratch("verify");
    let run = |out_dir: &Path, scale: &str| {
        bin()
            .args(["verify", "--only", "special", "--tolerance-scale", scale])
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap()
    };
    let a = run(&dir.join("a"), "1");
    let b = run(&dir.join("b"), "1");
    assert_exit(&a, 0);
    assert_exit(&b, 0);
    let bytes_a = std::fs::read(dir.join("a/report.json")).unwrap();
    let bytes_b = std::fs::read(dir.join("b/report.json")).unwrap();
    assert_eq!(bytes_a, bytes_b, "reports for identical (config, seed) differ");

    let tightened = run(&dir.join("c"), "1e-8");
    assert_exit(&tightened, 3);
    let report: serde_json::Value =
        serde_json::from_reader(File::open(dir.join("c/report.json")).unwrap()).unwrap();
    assert!(report["failed"].as_u64().unwrap() > 0);

    let unknown = bin()
        .args(["verify", "--only", "no-such-row"])
        .arg("--out")
        .arg(dir.join("d"))
        .output()
        .unwrap();
    assert_exit(&unknown, 2);
    std::fs::remove_dir_all(&dir).ok();
}
