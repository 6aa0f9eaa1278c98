use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::Trajectory;

pub const TRAJECTORY_HEADER: [&str; 9] = ["t", "A", "B", "C", "K23", "K31", "K12", "R", "product_drift"];

/// 17 significant digits: lossless for `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("cannot write {}: {e}", path.display()))
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let rows: Vec<Vec<String>> = traj
        .samples
        .iter()
        .map(|s| {
            let k = s.curvatures;
            [s.state.t, s.state.a, s.state.b, s.state.c, k.k23, k.k31, k.k12, k.r, s.product_drift].map(num).to_vec()
        })
        .collect();
    write_rows(path, &TRAJECTORY_HEADER, &rows)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    File::create(path).and_then(|mut f| f.write_all(text.as_bytes())).map_err(|e| io_err(path, e))
}
