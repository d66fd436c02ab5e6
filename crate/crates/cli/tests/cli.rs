use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DECOUPLED: &str = r#"
problem.extent = [1.0]
problem.nu = 0.1
problem.final_time = 1.0
problem.gamma = 1.0
problem.beta = 0.5
bounds.u_min = -1.0
bounds.u_max = 1.0
grid.cells = [8]
grid.nt = 16
control.u0 = "0.3 + 0.2*sin(3*t)"
"#;

const TRACKING: &str = r#"
rng_seed = 7

[problem]
extent = [1.0]
nu = 0.1
final_time = 1.0
alpha_q = 10.0
alpha_omega = 1.0
gamma = 1e-2

[fields]
c = "0.2*sin(2*x)"
b = "4*x*(1-x)"
rho0 = "1 + 0.5*cos(pi*x)"

[bounds]
u_min = -0.5
u_max = 0.5

[grid]
cells = [16]
nt = 20

[control]
target = "sin(2*pi*t)"

[optimizer]
method = "pgd"
max_iters = 200
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fpctrl"));
    c.env("FPCTRL_LOG", "quiet");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let j = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[j].to_string()).collect()
}

#[test]
fn validate_flags_constant_control_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "b1.toml",
        &format!("{DECOUPLED}fields.b = 1.0\n"),
    );
    let o = run(&["validate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("control_boundary=failed max_violation=1.0000000000000000e0"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("assumptions.json")).unwrap())
            .unwrap();
    assert_eq!(json["control_boundary_ok"], false);
    assert_eq!(json["control_boundary_violation"], 1.0);
}

#[test]
fn gradient_check_on_decoupled_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.toml", DECOUPLED);
    let o = run(&["check-gradient"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("max_rel_error="))
        .unwrap()
        .to_string();
    let value: f64 = line["max_rel_error=".len()..]
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(value <= 1e-7, "{line}");
}

#[test]
fn missing_config_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate"], &dir.path().join("absent.toml"), dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.starts_with("config: file not found"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_toml = write_config(dir.path(), "bad.toml", "problem.nu = [\n");
    assert_eq!(
        run(&["validate"], &bad_toml, dir.path()).status.code(),
        Some(3)
    );

    let bad_expr = write_config(
        dir.path(),
        "expr.toml",
        &format!("{DECOUPLED}fields.c = \"sin(\"\n"),
    );
    assert_eq!(
        run(&["validate"], &bad_expr, dir.path()).status.code(),
        Some(3)
    );

    let heavy = write_config(
        dir.path(),
        "mass.toml",
        &format!("{DECOUPLED}fields.rho0 = 2.0\n"),
    );
    let o = run(&["solve-forward"], &heavy, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("validation:"));

    let ok = write_config(dir.path(), "ok.toml", DECOUPLED);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run(&["solve-forward"], &ok, &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("io:"));

    let o = bin().arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn uniform_density_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "u.toml",
        "problem.extent = [2.0]\nproblem.nu = 0.3\nproblem.final_time = 1.0\nfields.b = \"x*(2-x)\"\ngrid.cells = [10]\ngrid.nt = 8\n",
    );
    let o = run(&["solve-forward"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rho = column(&dir.path().join("density.csv"), "rho");
    assert_eq!(rho.len(), 90);
    assert!(rho.iter().all(|r| r == &rho[0]));
    assert_eq!(rho[0].parse::<f64>().unwrap(), 0.5);
}

#[test]
fn optimize_outputs_are_deterministic_and_reimportable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.toml", TRACKING);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["optimize", "--seed", "3"], &cfg, out);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["control.csv", "density.csv", "history.csv", "report.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }

    let f_col: Vec<f64> = column(&a.join("history.csv"), "F")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert!(f_col.windows(2).all(|w| w[1] <= w[0]));

    // the exported control reproduces the reported cost exactly
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    let c = dir.path().join("c");
    let o = run(
        &[
            "solve-forward",
            "--control",
            a.join("control.csv").to_str().unwrap(),
        ],
        &cfg,
        &c,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fwd: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(c.join("forward.json")).unwrap()).unwrap();
    assert_eq!(
        fwd["cost"].as_f64().unwrap().to_bits(),
        report["value"].as_f64().unwrap().to_bits()
    );
    let final_state = column(&a.join("density.csv"), "rho");
    assert_eq!(final_state, column(&c.join("density.csv"), "rho"));
}

#[test]
fn diagnostics_run_at_an_exported_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.toml",
        &TRACKING.replace("method = \"pgd\"", "method = \"pncg\"\ntol_pg = 1e-10"),
    );
    let opt = dir.path().join("opt");
    assert_eq!(run(&["optimize"], &cfg, &opt).status.code(), Some(0));
    let ctl = opt.join("control.csv");
    let ctl = ctl.to_str().unwrap();

    let o = run(
        &["kkt-report", "--control", ctl],
        &cfg,
        &dir.path().join("k"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let kkt: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("k/kkt.json")).unwrap()).unwrap();
    assert!(kkt["stationarity_residual"].as_f64().unwrap() <= 1e-6);
    assert!(kkt["complementarity_violation"].as_f64().unwrap() <= 1e-8);

    let runs: Vec<_> = ["s1", "s2"]
        .iter()
        .map(|d| {
            let out = dir.path().join(d);
            let o = run(
                &["sonc-probe", "--control", ctl, "--seed", "11"],
                &cfg,
                &out,
            );
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            fs::read_to_string(out.join("sonc.json")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let sonc: serde_json::Value = serde_json::from_str(&runs[0]).unwrap();
    assert!(sonc["min_value"].as_f64().unwrap() >= -1e-8);
    assert!(sonc["delta_hat"].as_f64().unwrap() > 0.0);

    let o = run(&["check-hessian"], &cfg, &dir.path().join("h"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn control_outside_bounds_is_rejected_for_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.toml",
        &DECOUPLED.replace("0.3 + 0.2*sin(3*t)", "5"),
    );
    let o = run(&["kkt-report"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
}
