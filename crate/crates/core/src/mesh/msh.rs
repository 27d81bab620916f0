//! Gmsh MSH 2.2 ASCII reader and writer (nodes, line and triangle elements).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::Mesh;
use crate::error::{AetError, Result};

pub fn read_msh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AetError::io(path, e))?;
    read_msh_str(&text)
}

/// Parses MSH 2.2 ASCII text. Line elements are ignored; the boundary is
/// recomputed from the triangles. Nodes not referenced by any triangle are
/// dropped and the rest renumbered densely in file order.
pub fn read_msh_str(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut tris: Vec<[u64; 3]> = Vec::new();
    let mut seen_format = false;
    let mut seen_nodes = false;
    let mut seen_elements = false;
    let mut dropped_z = false;

    while let Some((lineno, line)) = lines.next() {
        match line {
            "" => continue,
            "$MeshFormat" => {
                let (n, l) = next_line(&mut lines, "$MeshFormat", lineno)?;
                let parts: Vec<&str> = l.split_whitespace().collect();
                if parts.len() < 3 || !parts[0].starts_with("2.") || parts[1] != "0" {
                    return Err(AetError::parse(
                        "$MeshFormat",
                        n,
                        format!("unsupported format line `{l}`, expected `2.2 0 8`"),
                    ));
                }
                expect_end(&mut lines, "$MeshFormat")?;
                seen_format = true;
            }
            "$Nodes" => {
                if !seen_format {
                    return Err(AetError::parse("$Nodes", lineno, "missing $MeshFormat header"));
                }
                let count = read_count(&mut lines, "$Nodes", lineno)?;
                for _ in 0..count {
                    let (n, l) = next_line(&mut lines, "$Nodes", lineno)?;
                    if l == "$EndNodes" {
                        return Err(AetError::parse(
                            "$Nodes",
                            n,
                            format!("declared {count} nodes but found only {}", coords.len()),
                        ));
                    }
                    let parts: Vec<&str> = l.split_whitespace().collect();
                    if parts.len() < 3 {
                        return Err(AetError::parse("$Nodes", n, format!("malformed node `{l}`")));
                    }
                    let id: u64 = parse_num(parts[0], "$Nodes", n)?;
                    let x: f64 = parse_num(parts[1], "$Nodes", n)?;
                    let y: f64 = parse_num(parts[2], "$Nodes", n)?;
                    if let Some(z) = parts.get(3) {
                        let z: f64 = parse_num(z, "$Nodes", n)?;
                        dropped_z |= z != 0.0;
                    }
                    if ids.insert(id, coords.len()).is_some() {
                        return Err(AetError::parse("$Nodes", n, format!("duplicate node id {id}")));
                    }
                    coords.push([x, y]);
                }
                let (n, l) = next_line(&mut lines, "$Nodes", lineno)?;
                if l != "$EndNodes" {
                    return Err(AetError::parse(
                        "$Nodes",
                        n,
                        format!("declared {count} nodes but found more before $EndNodes"),
                    ));
                }
                seen_nodes = true;
            }
            "$Elements" => {
                if !seen_nodes {
                    return Err(AetError::parse("$Elements", lineno, "$Elements before $Nodes"));
                }
                let count = read_count(&mut lines, "$Elements", lineno)?;
                for k in 0..count {
                    let (n, l) = next_line(&mut lines, "$Elements", lineno)?;
                    if l == "$EndElements" {
                        return Err(AetError::parse(
                            "$Elements",
                            n,
                            format!("declared {count} elements but found only {k}"),
                        ));
                    }
                    let fields = l
                        .split_whitespace()
                        .map(|s| parse_num::<u64>(s, "$Elements", n))
                        .collect::<Result<Vec<u64>>>()?;
                    if fields.len() < 3 {
                        return Err(AetError::parse("$Elements", n, format!("malformed element `{l}`")));
                    }
                    let (etype, ntags) = (fields[1], fields[2] as usize);
                    let conn = fields.get(3 + ntags..).unwrap_or(&[]);
                    let expected = match etype {
                        15 => 1,
                        1 => 2,
                        2 => 3,
                        _ => {
                            return Err(AetError::parse(
                                "$Elements",
                                n,
                                format!("unsupported element type {etype}; only points, lines and triangles are read"),
                            ))
                        }
                    };
                    if conn.len() != expected {
                        return Err(AetError::parse(
                            "$Elements",
                            n,
                            format!("element type {etype} needs {expected} nodes, found {}", conn.len()),
                        ));
                    }
                    for id in conn {
                        if !ids.contains_key(id) {
                            return Err(AetError::parse("$Elements", n, format!("unknown node id {id}")));
                        }
                    }
                    if etype == 2 {
                        tris.push([conn[0], conn[1], conn[2]]);
                    }
                }
                let (n, l) = next_line(&mut lines, "$Elements", lineno)?;
                if l != "$EndElements" {
                    return Err(AetError::parse(
                        "$Elements",
                        n,
                        format!("declared {count} elements but found more before $EndElements"),
                    ));
                }
                seen_elements = true;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // Skip unknown sections such as $PhysicalNames.
                let end = format!("$End{}", &other[1..]);
                loop {
                    match lines.next() {
                        Some((_, l)) if l == end => break,
                        Some(_) => {}
                        None => {
                            return Err(AetError::parse(other, lineno, format!("missing {end}")))
                        }
                    }
                }
            }
            other => {
                return Err(AetError::parse("file", lineno, format!("unexpected line `{other}`")));
            }
        }
    }

    if !seen_format {
        return Err(AetError::parse("$MeshFormat", 0, "missing $MeshFormat section"));
    }
    if !seen_nodes {
        return Err(AetError::parse("$Nodes", 0, "missing $Nodes section"));
    }
    if !seen_elements || tris.is_empty() {
        return Err(AetError::parse("$Elements", 0, "mesh contains no triangles"));
    }
    if dropped_z {
        log::warn!("MSH file has nonzero z coordinates; they are ignored");
    }

    let mut used = vec![false; coords.len()];
    for t in &tris {
        for id in t {
            used[ids[id]] = true;
        }
    }
    let mut dense = vec![usize::MAX; coords.len()];
    let mut nodes = Vec::new();
    for (i, p) in coords.iter().enumerate() {
        if used[i] {
            dense[i] = nodes.len();
            nodes.push(*p);
        }
    }
    let triangles = tris
        .iter()
        .map(|t| t.map(|id| dense[ids[&id]]))
        .collect();
    Mesh::new(nodes, triangles)
}

fn next_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    section: &str,
    start: usize,
) -> Result<(usize, &'a str)> {
    lines
        .next()
        .ok_or_else(|| AetError::parse(section, start, "unexpected end of file"))
}

fn read_count<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    section: &str,
    start: usize,
) -> Result<usize> {
    let (n, l) = next_line(lines, section, start)?;
    parse_num(l, section, n)
}

fn expect_end<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, section: &str) -> Result<()> {
    let end = format!("$End{}", &section[1..]);
    let (n, l) = next_line(lines, section, 0)?;
    if l != end {
        return Err(AetError::parse(section, n, format!("expected {end}, found `{l}`")));
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(s: &str, section: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| AetError::parse(section, line, format!("cannot parse `{s}`")))
}

/// Serializes a mesh as MSH 2.2 ASCII: boundary edges as line elements
/// (type 1) followed by triangles (type 2), 1-based ids.
pub fn write_msh_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(out, "$Nodes\n{}", mesh.num_nodes());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(out, "{} {:?} {:?} 0", i + 1, p[0], p[1]);
    }
    out.push_str("$EndNodes\n");
    let nb = mesh.boundary_edges().len();
    let _ = writeln!(out, "$Elements\n{}", nb + mesh.num_triangles());
    let mut id = 1;
    for &[a, b] in mesh.boundary_edges() {
        let _ = writeln!(out, "{id} 1 2 1 1 {} {}", a + 1, b + 1);
        id += 1;
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{id} 2 2 2 1 {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        id += 1;
    }
    out.push_str("$EndElements\n");
    out
}

pub fn write_msh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_msh_string(mesh)).map_err(|e| AetError::io(path, e))
}
