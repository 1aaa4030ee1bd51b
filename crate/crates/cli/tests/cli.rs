use std::path::Path;
use std::process::Command;

use photon_bounds::channel::PureLossChannel;
use photon_bounds::table::DetectorSpec;
use photon_bounds::{PoissonSource, ThresholdDetector};
use photon_bounds_cli::table_io::write_table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_photon-bounds"))
}

fn fixture(dir: &Path, t: f64) -> std::path::PathBuf {
    let source = PoissonSource::new(vec![1e-3, 1e-2, 0.5]).unwrap();
    let det = ThresholdDetector::new(1e-6, 1.0, vec![0.94, 0.96, 0.98, 1.0]).unwrap();
    let table = PureLossChannel::new(t)
        .unwrap()
        .forward_table(&source, &DetectorSpec::Threshold(det))
        .unwrap();
    let path = dir.join("table.csv");
    write_table(&table, &path).unwrap();
    path
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn estimate_both_methods_contain_truth() {
    let dir = tempfile::tempdir().unwrap();
    let table = fixture(dir.path(), 0.1);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "estimator.targets = 1|1\nestimator.n0 = 2\nestimator.m0 = 2\n",
    )
    .unwrap();
    let out = bin()
        .args(["estimate", "--method", "both", "--table"])
        .arg(&table)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(&dir.path().join("estimate.csv"));
    assert_eq!(r.len(), 2);
    assert_eq!(r[0][0], "analytical");
    assert_eq!(r[1][0], "lp");
    for row in &r {
        let (lo, hi): (f64, f64) = (row[3].parse().unwrap(), row[4].parse().unwrap());
        assert!(lo <= 0.1 && 0.1 <= hi, "{row:?}");
    }
}

#[test]
fn empty_targets_give_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let table = fixture(dir.path(), 0.1);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!("input.table = {}\nestimator.targets =\n", table.display()),
    )
    .unwrap();
    let status = bin()
        .arg("estimate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("estimate.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("method,n,m,lo,hi"));
}

#[test]
fn malformed_table_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let table = fixture(dir.path(), 0.1);
    let text = std::fs::read_to_string(&table)
        .unwrap()
        .replacen("\n1.", "\nabc,1.", 1);
    std::fs::write(&table, text).unwrap();
    let out = bin()
        .arg("estimate")
        .arg("--table")
        .arg(&table)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("table.csv:3:"), "{err}");
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "channel.error = lots\n").unwrap();
    let out = bin()
        .arg("simulate-qkd")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.cfg:1:"));
}

#[test]
fn bins_not_covering_range_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "detector.edges = 1, 2, 3, 4, 5, 6, 7\n").unwrap();
    let out = bin()
        .arg("simulate-tcspc")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // A detector order the four attenuation levels cannot support.
    let dir = tempfile::tempdir().unwrap();
    let table = fixture(dir.path(), 0.1);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "estimator.targets = 5|5\nestimator.n0 = 5\nestimator.m0 = 5\n",
    )
    .unwrap();
    let out = bin()
        .arg("estimate")
        .arg("--table")
        .arg(&table)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn full_channel_error_kills_single_photon_term() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "channel.error = 0.5\nchannel.loss_stop = 20\nchannel.loss_step = 10\nqkd.protocols = bb84\n")
        .unwrap();
    let status = bin()
        .arg("simulate-qkd")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let r = rows(&dir.path().join("qkd.csv"));
    assert_eq!(r.len(), 3);
    for row in r {
        let single: f64 = row[19].parse().unwrap();
        assert_eq!(single, 0.0, "{row:?}");
    }
}

#[test]
fn zero_excitation_tcspc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "scene.excitation = 0\nscene.t_stop = 100\n").unwrap();
    let status = bin()
        .arg("simulate-tcspc")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    for row in rows(&dir.path().join("tcspc.csv")) {
        let (lo, hi): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        assert!(lo <= 0.0 && 0.0 <= hi);
    }
}

#[test]
fn sampled_estimate_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let table = fixture(dir.path(), 0.1);
    let run = |out: &Path, seed: &str| {
        let status = bin()
            .args(["estimate", "--shots", "1000000", "--seed", seed, "--table"])
            .arg(&table)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("estimate.csv")).unwrap()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&a, "7"), run(&b, "7"));
}
