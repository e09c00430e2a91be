use std::path::{Path, PathBuf};
use std::process::Command;

use infospec_cli::{run, run_with_workers, to_csv_string, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_infospec"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("infospec-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn spectrum_preset_writes_sorted_csv() {
    let out = scratch("entropy.csv");
    let status = bin().args(["spectrum", "--config"]).arg(preset("entropy-qubit.toml")).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("experiment,n,gamma,seed,params,metric,value,status\n"));
    assert!(!text.contains('\r'));
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let ns: Vec<usize> = rd.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert!(ns.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*ns.first().unwrap(), 2);
    assert_eq!(*ns.last().unwrap(), 12);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = scratch("a.csv");
    let b = scratch("b.csv");
    for (out, workers) in [(&a, "1"), (&b, "2")] {
        let status = bin()
            .args(["capacity", "--config"])
            .arg(preset("bsc-capacity.toml"))
            .args(["--workers", workers, "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let out = bin().args(["capacity", "--config"]).arg(preset("bsc-capacity.toml")).args(["--seed", "41"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let seeds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).filter(|s| !s.is_empty()).collect();
    assert!(!seeds.is_empty());
    assert!(seeds.iter().all(|&s| s == "41"));
}

#[test]
fn config_errors_exit_with_two() {
    let bad = scratch("bad.toml");
    std::fs::write(&bad, "experiment = \"spectrum\"\nns = [2]\nunknown = 3\n[spectrum]\nsource = { kind = \"qubit\", p = 0.3 }\n").unwrap();
    let out = bin().args(["spectrum", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown"));

    let out = bin().args(["mixed", "--config"]).arg(preset("entropy-qubit.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["spectrum", "--config"]).arg(scratch("missing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_verification_exits_with_one() {
    let cfg = scratch("verify.toml");
    std::fs::write(&cfg, "experiment = \"verify\"\n[verify]\nsuites = [\"entropy-convergence\"]\n").unwrap();
    let out = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains(",FAIL\n"));

    std::fs::write(&cfg, "experiment = \"verify\"\n[verify]\nsuites = [\"compression-pincer\"]\n").unwrap();
    let out = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn numerical_failures_become_error_rows() {
    // The crossing lies far outside this window, so estimation fails for every n.
    let text = "experiment = \"spectrum\"\nns = [2, 3]\n[estimator]\nwindow = [20.0, 21.0]\n[spectrum]\nsource = { kind = \"qubit\", p = 0.3 }\n";
    let cfg = ExperimentConfig::from_toml(text, "inline").unwrap();
    let rows = run(&cfg).unwrap();
    let errors: Vec<_> = rows.iter().filter(|r| r.is_error()).collect();
    assert_eq!(errors.len(), 2);
    assert_eq!(errors[0].n, Some(2));
    assert_eq!(errors[1].n, Some(3));
    let csv = to_csv_string(&rows);
    assert!(csv.lines().skip(1).all(|l| l.contains("error: ") || l.ends_with(",ok")));
}

#[test]
fn densecode_bell_trends_to_two_log_two() {
    let cfg = ExperimentConfig::load(&preset("densecode-bell.toml")).unwrap();
    let rows = run_with_workers(&cfg, Some(2)).unwrap();
    let cap: Vec<f64> = rows.iter().filter(|r| r.metric == "capacity").map(|r| r.value.unwrap()).collect();
    assert_eq!(cap.len(), 5);
    let target = 2.0 * std::f64::consts::LN_2;
    assert!(cap.iter().all(|c| (c - target).abs() < 0.05), "{cap:?}");
    let err = rows.iter().find(|r| r.metric == "protocol_error").unwrap();
    assert!(err.value.unwrap() < 1e-9);
}
