//! File export: legacy VTK for viewing, CSV convergence histories, and the
//! `AETFIELD v1` text format for nodal fields.
//!
//! The field format is line based:
//!
//! ```text
//! AETFIELD v1
//! mesh 00c0ffee12345678
//! nodes 3
//! 1
//! 0.5
//! 1.25
//! ```
//!
//! Values are written with shortest round-trip formatting, so reading a
//! file back gives the identical `f64`s.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{AetError, Result};
use crate::field::NodalField;
use crate::mesh::Mesh;
use crate::recon::{IterationRecord, ReconHistory};

pub const HISTORY_HEADER: &str = "k,J_beta,fit,tv,e_L1,e_TV,e_dBV,update_norm,seconds";
const FIELD_MAGIC: &str = "AETFIELD v1";

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| AetError::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AetError::io(path, e))
}

/// Renders a legacy VTK ASCII unstructured grid with one scalar block per
/// named field. Field names must be non-empty and free of whitespace.
pub fn vtk_string(mesh: &Mesh, fields: &[(&str, &NodalField)]) -> Result<String> {
    for (name, f) in fields {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(AetError::Domain(format!("invalid VTK field name {name:?}")));
        }
        f.check_mesh(mesh)?;
    }
    let n = mesh.num_nodes();
    let nt = mesh.num_triangles();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\naet\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, f) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in f.iter() {
                let _ = writeln!(s, "{v}");
            }
        }
    }
    Ok(s)
}

pub fn export_vtk(mesh: &Mesh, fields: &[(&str, &NodalField)], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &vtk_string(mesh, fields)?)
}

/// Contents of a VTK file as read back by [`parse_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSummary {
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub fields: Vec<(String, Vec<f64>)>,
}

/// Minimal reader for files produced by [`vtk_string`].
pub fn parse_vtk(text: &str) -> Result<VtkSummary> {
    let err = |line: usize, m: &str| AetError::parse("vtk", line, m);
    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&"# vtk DataFile Version 3.0") {
        return Err(err(1, "missing VTK header"));
    }
    let mut i = 4;
    let count = |i: usize, key: &str| -> Result<usize> {
        let l = lines.get(i).ok_or_else(|| err(i + 1, "unexpected end of file"))?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(err(i + 1, &format!("expected {key}")));
        }
        it.next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(i + 1, "bad count"))
    };
    let nums = |i: usize| -> Result<Vec<f64>> {
        let l = lines.get(i).ok_or_else(|| err(i + 1, "unexpected end of file"))?;
        l.split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| err(i + 1, "bad number")))
            .collect()
    };

    let n = count(i, "POINTS")?;
    i += 1;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let v = nums(i)?;
        if v.len() != 3 {
            return Err(err(i + 1, "point needs 3 coordinates"));
        }
        points.push([v[0], v[1]]);
        i += 1;
    }
    let nt = count(i, "CELLS")?;
    i += 1;
    let mut cells = Vec::with_capacity(nt);
    for _ in 0..nt {
        let v = nums(i)?;
        if v.len() != 4 || v[0] != 3.0 {
            return Err(err(i + 1, "cell is not a triangle"));
        }
        cells.push([v[1] as usize, v[2] as usize, v[3] as usize]);
        i += 1;
    }
    if count(i, "CELL_TYPES")? != nt {
        return Err(err(i + 1, "cell type count mismatch"));
    }
    i += 1;
    for _ in 0..nt {
        if lines.get(i).map(|l| l.trim()) != Some("5") {
            return Err(err(i + 1, "cell type is not 5"));
        }
        i += 1;
    }
    let mut fields = Vec::new();
    if i < lines.len() {
        if count(i, "POINT_DATA")? != n {
            return Err(err(i + 1, "point data count mismatch"));
        }
        i += 1;
        while i < lines.len() {
            let name = lines[i]
                .strip_prefix("SCALARS ")
                .and_then(|r| r.split_whitespace().next())
                .ok_or_else(|| err(i + 1, "expected SCALARS"))?
                .to_string();
            i += 2;
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                let v = nums(i)?;
                values.push(*v.first().ok_or_else(|| err(i + 1, "missing value"))?);
                i += 1;
            }
            fields.push((name, values));
        }
    }
    Ok(VtkSummary { points, cells, fields })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV rendering of the outer-iteration records (the `k = 0` state is not
/// a row).
pub fn history_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in records {
        let vals = [r.j_beta, r.fit, r.tv, r.e_l1, r.e_tv, r.e_dbv, r.update_norm, r.seconds];
        s.push_str(&r.k.to_string());
        for v in vals {
            s.push(',');
            s.push_str(&fmt17(v));
        }
        s.push('\n');
    }
    s
}

pub fn export_history(history: &ReconHistory, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &history_csv(&history.records))
}

/// Parses a history CSV. Inner CG reports are not stored and come back empty.
pub fn parse_history_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(AetError::parse("history", 1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let bad = |m: &str| AetError::parse("history", i + 2, m);
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 9 {
                return Err(bad("expected 9 columns"));
            }
            let k = cols[0].parse().map_err(|_| bad("bad iteration index"))?;
            let v: Vec<f64> = cols[1..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad("bad number")))
                .collect::<Result<_>>()?;
            Ok(IterationRecord {
                k,
                j_beta: v[0],
                fit: v[1],
                tv: v[2],
                e_l1: v[3],
                e_tv: v[4],
                e_dbv: v[5],
                update_norm: v[6],
                seconds: v[7],
                inner: Vec::new(),
            })
        })
        .collect()
}

pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<IterationRecord>> {
    parse_history_csv(&read_file(path.as_ref())?)
}

pub fn field_string(field: &NodalField) -> String {
    let mut s = format!("{FIELD_MAGIC}\nmesh {:016x}\nnodes {}\n", field.mesh_id(), field.len());
    for v in field.iter() {
        let _ = writeln!(s, "{v:?}");
    }
    s
}

pub fn write_field(field: &NodalField, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &field_string(field))
}

/// Parses a field file, checking that it belongs to `mesh`.
pub fn parse_field(mesh: &Mesh, text: &str) -> Result<NodalField> {
    let sec = "AETFIELD";
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(FIELD_MAGIC) {
        return Err(AetError::parse(sec, 1, "missing `AETFIELD v1` header"));
    }
    let id = lines
        .next()
        .and_then(|l| l.strip_prefix("mesh "))
        .and_then(|h| u64::from_str_radix(h.trim(), 16).ok())
        .ok_or_else(|| AetError::parse(sec, 2, "expected `mesh <hex id>`"))?;
    let n: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("nodes "))
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| AetError::parse(sec, 3, "expected `nodes <count>`"))?;
    if id != mesh.id() {
        return Err(AetError::MeshMismatch {
            expected: mesh.id(),
            found: id,
        });
    }
    if n != mesh.num_nodes() {
        return Err(AetError::Dimension {
            expected: mesh.num_nodes(),
            found: n,
        });
    }
    let values: Vec<f64> = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| AetError::parse(sec, i + 4, format!("bad value {l:?}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != n {
        return Err(AetError::parse(sec, 4 + values.len(), format!("expected {n} values, found {}", values.len())));
    }
    NodalField::new(mesh, values)
}

pub fn read_field(mesh: &Mesh, path: impl AsRef<Path>) -> Result<NodalField> {
    parse_field(mesh, &read_file(path.as_ref())?)
}
