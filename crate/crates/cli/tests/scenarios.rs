//! The example configs shipped in `scenarios/` stay valid and solvable.

use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn fpctrl(args: &[&str], config: &Path, out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fpctrl"))
        .env("FPCTRL_LOG", "quiet")
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn every_scenario_satisfies_the_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        seen += 1;
        let o = fpctrl(&["validate"], &path, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", path.display());
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(!text.contains("failed"), "{}: {text}", path.display());
    }
    assert!(seen >= 3);
}

#[test]
fn recovery_scenario_reaches_the_generating_control() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_dir().join("recovery_1d.toml");
    let o = fpctrl(&["optimize"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
    )
    .unwrap();
    // cost of the generating control is γ/2
    assert!(report["value"].as_f64().unwrap() <= 0.5e-6 + 1e-10);
}
