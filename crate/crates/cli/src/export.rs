//! Deterministic CSV and JSON output.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fpctrl::grid::Grid;
use fpctrl::optimizer::{Activity, IterationRecord};
use fpctrl::{ControlTrajectory, StateTrajectory};
use serde::Serialize;

use crate::error::CliError;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(f)))
}

/// Columns `t, x1[, x2], rho`, one row per (level, cell), level-major.
pub fn write_density(
    path: &Path,
    grid: &Grid<f64>,
    state: &StateTrajectory,
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=grid.dim()).map(|j| format!("x{j}")));
    header.push("rho".into());
    w.write_record(&header)?;
    let centers = grid.cell_centers();
    for k in 0..=state.nt() {
        let t = fmt(k as f64 * state.dt());
        for (c, &r) in state.level(k).iter().enumerate() {
            let mut row = vec![t.clone()];
            row.extend(centers[c][..grid.dim()].iter().map(|&x| fmt(x)));
            row.push(fmt(r));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, u_1..u_d, phi_1..phi_d, class_1..class_d`, one row per step,
/// `t` the step's right endpoint.
pub fn write_control(
    path: &Path,
    u: &ControlTrajectory,
    phi: &ControlTrajectory,
    classes: &[Activity],
) -> Result<(), CliError> {
    let d = u.n_controls();
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    for prefix in ["u", "phi", "class"] {
        header.extend((1..=d).map(|i| format!("{prefix}_{i}")));
    }
    w.write_record(&header)?;
    for s in 0..u.nt() {
        let mut row = vec![fmt((s + 1) as f64 * u.dt())];
        row.extend(u.step(s).iter().map(|&v| fmt(v)));
        row.extend(phi.step(s).iter().map(|&v| fmt(v)));
        row.extend(
            classes[s * d..(s + 1) * d]
                .iter()
                .map(|c| c.label().to_string()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `iter, F, pg_norm, step`.
pub fn write_history(path: &Path, history: &[IterationRecord<f64>]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["iter", "F", "pg_norm", "step"])?;
    for r in history {
        w.write_record([
            r.iter.to_string(),
            fmt(r.value),
            fmt(r.pg_norm),
            fmt(r.step),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut f = BufWriter::new(
        File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
    );
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Reads one numeric column of a CSV file with a header row.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CliError::Config(format!("file not found: {}", path.display()))
        }
        _ => CliError::Config(format!("{}: {e}", path.display())),
    })?;
    let headers = r
        .headers()
        .map_err(|e| CliError::Config(e.to_string()))?
        .clone();
    let j = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| CliError::Config(format!("{}: no column {column:?}", path.display())))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let field = rec.get(j).unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|_| {
            CliError::Config(format!(
                "{}: row {}: {field:?} is not a number",
                path.display(),
                line + 2
            ))
        })?;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fpctrl::Role;

    #[test]
    fn seventeen_digit_floats_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            f64::MAX,
            6.02214076e23,
            1.0 + f64::EPSILON,
        ] {
            assert_eq!(fmt(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn density_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(&[1.0, 2.0], &[3, 2]).unwrap();
        let vals: Vec<f64> = (0..18).map(|i| (i as f64).sqrt() / 7.0).collect();
        let s = StateTrajectory::from_values(6, 0.25, Role::Density, vals.clone()).unwrap();
        let path = dir.path().join("d.csv");
        write_density(&path, &g, &s).unwrap();
        assert_eq!(read_column(&path, "rho").unwrap(), vals);
        assert_eq!(read_column(&path, "x2").unwrap()[3], 1.5);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x1,x2,rho\n"));
    }

    #[test]
    fn missing_column_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_history(&path, &[]).unwrap();
        assert!(matches!(
            read_column(&path, "rho"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            read_column(&dir.path().join("nope.csv"), "rho"),
            Err(CliError::Config(m)) if m.starts_with("file not found")
        ));
    }
}
