//! Plot-ready output files and the profile reader used for `u0` seeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use kgm_core::solver::TracePoint;
use kgm_core::{DomainGrid, Field, GridKind};
use serde_json::{Map, Value};

use crate::run::RunError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

fn profile_header(kind: GridKind) -> &'static [&'static str] {
    match kind {
        GridKind::RadialBall => &["r", "u", "phi"],
        GridKind::PeriodicCube => &["x", "y", "z", "u", "phi"],
    }
}

pub fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["iter", "I", "cerami", "norm_E"]).map_err(|e| io_err(path, e))?;
    for p in trace {
        w.serialize((p.iter, p.level, p.cerami, p.norm_e))
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// `r,u,phi` on the ball, `x,y,z,u,phi` on the cube, one row per node.
pub fn write_profile(path: &Path, grid: &DomainGrid, u: &Field, phi: &Field) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(profile_header(grid.kind())).map_err(|e| io_err(path, e))?;
    for i in 0..grid.node_count() {
        let [x, y, z] = grid.coords(i);
        let (ui, pi) = (u.values()[i], phi.values()[i]);
        match grid.kind() {
            GridKind::RadialBall => w.serialize((x, ui, pi)),
            GridKind::PeriodicCube => w.serialize((x, y, z, ui, pi)),
        }
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads the `u` column of a profile written for the same grid.
pub fn read_profile(path: &Path, grid: &DomainGrid) -> Result<Field, RunError> {
    let bad = |reason: String| RunError::Profile(format!("{}: {reason}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected = profile_header(grid.kind());
    let n_coords = expected.len() - 2;
    if header.len() < n_coords + 1 || header[..n_coords] != expected[..n_coords] || header[n_coords] != "u" {
        return Err(bad(format!(
            "header {header:?} does not start with {:?}",
            &expected[..=n_coords]
        )));
    }
    let tol = 1e-9 * grid.extent();
    let mut u = Vec::with_capacity(grid.node_count());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        if i >= grid.node_count() {
            return Err(bad(format!("more than {} rows", grid.node_count())));
        }
        let num = |k: usize| -> Result<f64, RunError> {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {}: column {k} is not a number", i + 1)))
        };
        let c = grid.coords(i);
        for (k, ck) in c.iter().take(n_coords).enumerate() {
            if (num(k)? - ck).abs() > tol {
                return Err(bad(format!("row {}: coordinates do not match the grid", i + 1)));
            }
        }
        u.push(num(n_coords)?);
    }
    if u.len() != grid.node_count() {
        return Err(bad(format!("expected {} rows, found {}", grid.node_count(), u.len())));
    }
    let mut field = Field::new(grid, u).map_err(RunError::Core)?;
    grid.zero_constrained(field.values_mut());
    Ok(field)
}

/// Writes one JSON object per line.
pub fn write_jsonl(path: &Path, rows: &[Map<String, Value>]) -> Result<(), RunError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_report(path: &Path, report: &Map<String, Value>) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
