use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ordcon::distribution::{DistributionSpec, DriverFeature};

fn ordcon(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordcon"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_presets_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    for spec in ["dist1", "dist2"] {
        let o = ordcon(dir.path(), &["verify", "--spec", spec]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("assumptions.json")).unwrap()).unwrap();
        assert_eq!(report["a1_irreversible"], true);
    }
}

#[test]
fn verify_reports_violations_with_check_failure() {
    let dir = tempfile::tempdir().unwrap();
    let leaky = DriverFeature { deactivation_prob: 0.2, ..DriverFeature::new(0.4) };
    let spec = DistributionSpec::dist1().with_driver(0, leaky).unwrap();
    let path = dir.path().join("leaky.json");
    fs::write(&path, spec.to_json()).unwrap();
    let o = ordcon(dir.path(), &["verify", "--spec", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("\"a1_irreversible\": false"));
}

#[test]
fn budget_overrun_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ordcon(dir.path(), &["verify", "--entry-budget", "10"])), 2);
    assert_eq!(code(&ordcon(dir.path(), &["oracle", "--entry-budget", "10"])), 2);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ordcon(dir.path(), &["verify", "--bogus"])), 1);
    assert_eq!(code(&ordcon(dir.path(), &["verify", "--spec", "/nonexistent/spec.json"])), 1);
    assert_eq!(code(&ordcon(dir.path(), &["sweep", "--schemes", "nope"])), 1);
    assert_eq!(code(&ordcon(dir.path(), &["sweep", "--m-grid", "400,50", "--replicates", "1"])), 1);
    assert_eq!(code(&ordcon(dir.path(), &["oracle", "--delta", "1.5"])), 1);
    assert_eq!(code(&ordcon(dir.path(), &["run-all", "--profile", "huge"])), 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"tau\": 1}").unwrap();
    assert_eq!(code(&ordcon(dir.path(), &["verify", "--spec", bad.to_str().unwrap()])), 1);
}

#[test]
fn simulate_oracle_select_and_downstream_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&ordcon(d, &["simulate", "--n", "20", "--spec", "dist2"])), 0);
    let traj = fs::read_to_string(d.join("trajectories.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 20 * 10);
    for s in ["ocp", "pcl", "ocp_biased"] {
        assert!(d.join(format!("pairs_{s}.csv")).exists(), "{s}");
    }

    let o = ordcon(d, &["oracle", "--spec", "dist1", "--vc-f", "5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(d.join("oracle.csv")).unwrap().lines().count(), 1 + 3 * 70);
    let bound: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(bound["bounds"].as_array().unwrap().len(), 3);

    assert_eq!(code(&ordcon(d, &["select", "--spec", "dist2", "--m", "2000"])), 0);
    assert!(d.join("selection.csv").exists() && d.join("selection_model.json").exists());

    let o = ordcon(d, &["downstream", "--m", "400", "--n-grid", "16,64", "--replicates", "2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(d.join("downstream.csv")).unwrap().lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn sweep_is_identical_across_thread_counts_and_criteria_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["sweep", "--spec", "dist2", "--m-grid", "50,200", "--replicates", "3", "--schemes", "ocp,pcl"];
    assert_eq!(code(&ordcon(a.path(), &[&args[..], &["--threads", "1"]].concat())), 0);
    assert_eq!(code(&ordcon(b.path(), &[&args[..], &["--threads", "3"]].concat())), 0);
    for f in ["sweep.csv", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert!(a.path().join("timing.json").exists());
    assert_eq!(fs::read_to_string(a.path().join("sweep.csv")).unwrap().lines().count(), 1 + 2 * 2 * 3);

    let c = tempfile::tempdir().unwrap();
    assert_eq!(code(&ordcon(c.path(), &[&args[..], &["--criterion", "loss"]].concat())), 0);
    assert_eq!(code(&ordcon(c.path(), &[&args[..], &["--criterion", "hinge"]].concat())), 1);
}

#[test]
fn quick_run_all_passes_its_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = ordcon(dir.path(), &["run-all", "--profile", "quick", "--m-grid", "50,400", "--replicates", "2", "--check"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS pcl_divergence_dist1"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    for f in manifest["files"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn help_and_version_exit_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = ordcon(dir.path(), &["--help"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for sub in ["simulate", "sweep", "oracle", "verify", "downstream", "select", "run-all"] {
        assert!(text.contains(sub), "{sub}");
    }
}
