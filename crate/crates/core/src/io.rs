//! Raw field dumps (little-endian f64, row-major N×N, JSON sidecar) and CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::duhamel::{TimeMesh, Trajectory};
use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(rename = "N")]
    pub points: usize,
    pub t: f64,
    pub name: String,
}

fn stem(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("f64") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

/// Writes `<base>.f64` and `<base>.json`; returns the two paths.
pub fn write_field(base: &Path, field: &ScalarField, t: f64, name: &str) -> Result<(PathBuf, PathBuf)> {
    let base = stem(base);
    if let Some(dir) = base.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let raw = base.with_extension("f64");
    let side = base.with_extension("json");
    let mut bytes = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&raw, bytes)?;
    let meta = FieldSidecar {
        extent: field.grid().extent(),
        points: field.grid().points(),
        t,
        name: name.to_string(),
    };
    fs::write(&side, serde_json::to_string_pretty(&meta)?)?;
    Ok((raw, side))
}

/// Reads a dump given either file of the pair (or their common stem).
pub fn read_field(path: &Path) -> Result<(ScalarField, FieldSidecar)> {
    let base = stem(path);
    let meta: FieldSidecar = serde_json::from_str(&fs::read_to_string(base.with_extension("json"))?)?;
    let grid = GridSpec::new(meta.extent, meta.points)?;
    let bytes = fs::read(base.with_extension("f64"))?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Schema {
            path: base.with_extension("f64").display().to_string(),
            message: format!("expected {} bytes, found {}", 8 * grid.len(), bytes.len()),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((ScalarField::from_values(grid, values)?, meta))
}

/// Minimal CSV writer: header row then numeric rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        writeln!(f, "{}", r.join(","))?;
    }
    Ok(())
}

/// Shortest round-trip representation, `NaN` rendered empty.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryIndex {
    times: Vec<f64>,
    nodes: Vec<[String; 3]>,
}

/// Dumps every node (the `t = 0` data as node 0) as `{n,c,zeta}_{k:04}` plus
/// `trajectory.json` listing times and file stems.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut nodes = Vec::with_capacity(traj.len() + 1);
    let all = std::iter::once((0.0, traj.initial())).chain(traj.times().iter().copied().zip(traj.nodes()));
    for (k, (t, f)) in all.enumerate() {
        let names = [format!("n_{k:04}"), format!("c_{k:04}"), format!("zeta_{k:04}")];
        for (name, field, label) in [(&names[0], &f.n, "n"), (&names[1], &f.c, "c"), (&names[2], &f.zeta, "zeta")] {
            write_field(&dir.join(name), field, t, label)?;
        }
        nodes.push(names);
    }
    let index = dir.join("trajectory.json");
    let body = TrajectoryIndex { times: traj.times().to_vec(), nodes };
    fs::write(&index, serde_json::to_string_pretty(&body)?)?;
    Ok(index)
}

/// Reads a directory written by [`write_trajectory`].
pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let index: TrajectoryIndex = serde_json::from_str(&fs::read_to_string(dir.join("trajectory.json"))?)?;
    if index.nodes.len() != index.times.len() + 1 {
        return Err(Error::Schema {
            path: "trajectory.json.nodes".into(),
            message: format!("{} entries for {} times plus the initial data", index.nodes.len(), index.times.len()),
        });
    }
    let mut fields = index
        .nodes
        .iter()
        .map(|names| {
            let f = |s: &String| read_field(&dir.join(s)).map(|(v, _)| v);
            Ok((f(&names[0])?, f(&names[1])?, f(&names[2])?))
        })
        .collect::<Result<Vec<_>>>()?;
    let initial = fields.remove(0);
    Trajectory::from_fields(&TimeMesh::from_times(index.times)?, initial, fields)
}
