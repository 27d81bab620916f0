//! Conforming triangle meshes of planar domains.

mod disk;
mod locate;
mod msh;

use std::collections::HashMap;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{AetError, Result};
use crate::fem::CsrPattern;

pub use disk::generate_disk_mesh;
pub use locate::{interpolate_p1, Locator, PointLocation};
pub use msh::{read_msh, read_msh_str, write_msh, write_msh_string};

/// Tolerance for point location, relative to the domain diameter.
pub const LOCATE_TOL: f64 = 1e-10;

/// Immutable conforming triangulation with precomputed P1 geometry.
#[derive(Debug)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    h: f64,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    patch_area: Vec<f64>,
    node_triangles: Vec<Vec<usize>>,
    diameter: f64,
    id: u64,
    locator: OnceLock<Locator>,
    pattern: OnceLock<CsrPattern>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            h: self.h,
            areas: self.areas.clone(),
            grads: self.grads.clone(),
            patch_area: self.patch_area.clone(),
            node_triangles: self.node_triangles.clone(),
            diameter: self.diameter,
            id: self.id,
            locator: OnceLock::new(),
            pattern: OnceLock::new(),
        }
    }
}

impl Mesh {
    /// Builds a mesh from coordinates and connectivity.
    ///
    /// Clockwise triangles are reoriented. The boundary is recomputed from
    /// edges that belong to exactly one triangle and must form one closed
    /// loop; every node must be used by some triangle.
    pub fn new(nodes: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(AetError::InvalidMesh("mesh has no triangles".into()));
        }
        let n = nodes.len();
        let mut used = vec![false; n];
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= n {
                    return Err(AetError::InvalidMesh(format!(
                        "triangle {t} references node {v}, mesh has {n} nodes"
                    )));
                }
                used[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(AetError::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            if signed_area(&nodes, tri) < 0.0 {
                tri.swap(1, 2);
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(AetError::InvalidMesh(format!("node {v} is not used by any triangle")));
        }

        let (xmin, xmax, ymin, ymax) = bounding_box(&nodes);
        let diameter = ((xmax - xmin).powi(2) + (ymax - ymin).powi(2)).sqrt();

        let mut areas = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let area = signed_area(&nodes, tri);
            if !(area > 1e-14 * diameter * diameter) {
                return Err(AetError::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            areas.push(area);
            grads.push(basis_gradients(&nodes, tri, area));
        }

        // Directed edges: an interior edge appears once in each direction.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut h: f64 = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if directed.insert((a, b), t).is_some() {
                    return Err(AetError::InvalidMesh(format!(
                        "edge ({a}, {b}) is used twice with the same orientation"
                    )));
                }
                h = h.max(dist(nodes[a], nodes[b]));
            }
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) && next.insert(a, b).is_some() {
                return Err(AetError::InvalidMesh(format!(
                    "boundary is not a simple loop at node {a}"
                )));
            }
        }
        if next.is_empty() {
            return Err(AetError::InvalidMesh("mesh has no boundary".into()));
        }
        let start = *next.keys().min().expect("nonempty");
        let mut boundary_edges = Vec::with_capacity(next.len());
        let mut cur = start;
        loop {
            let nb = *next.get(&cur).ok_or_else(|| {
                AetError::InvalidMesh(format!("boundary loop is open at node {cur}"))
            })?;
            boundary_edges.push([cur, nb]);
            cur = nb;
            if cur == start {
                break;
            }
            if boundary_edges.len() > next.len() {
                return Err(AetError::InvalidMesh("boundary loop does not close".into()));
            }
        }
        if boundary_edges.len() != next.len() {
            return Err(AetError::InvalidMesh(format!(
                "boundary has {} edges but the loop through node {start} has {}",
                next.len(),
                boundary_edges.len()
            )));
        }

        let mut node_triangles = vec![Vec::new(); n];
        let mut patch_area = vec![0.0; n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                node_triangles[v].push(t);
                patch_area[v] += areas[t];
            }
        }

        let id = hash_mesh(&nodes, &triangles);
        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            h,
            areas,
            grads,
            patch_area,
            node_triangles,
            diameter,
            id,
            locator: OnceLock::new(),
            pattern: OnceLock::new(),
        })
    }

    /// The unit square `[0,1]²` split along its diagonal into two triangles.
    pub fn unit_square() -> Self {
        Self::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .expect("valid fixture")
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary edges as one counter-clockwise loop (domain on the left).
    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Maximum edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Constant gradients of the three vertex basis functions of each triangle.
    pub fn basis_gradients(&self) -> &[[[f64; 2]; 3]] {
        &self.grads
    }

    /// Total area of the triangles around each node.
    pub fn patch_areas(&self) -> &[f64] {
        &self.patch_area
    }

    /// Triangles adjacent to each node, in ascending order.
    pub fn node_triangles(&self) -> &[Vec<usize>] {
        &self.node_triangles
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|&[a, b]| dist(self.nodes[a], self.nodes[b]))
            .sum()
    }

    /// Gradient of a P1 field on every triangle.
    pub fn gradients(&self, nodal: &[f64]) -> Vec<[f64; 2]> {
        self.triangles
            .iter()
            .zip(&self.grads)
            .map(|(tri, g)| {
                let mut out = [0.0; 2];
                for k in 0..3 {
                    out[0] += nodal[tri[k]] * g[k][0];
                    out[1] += nodal[tri[k]] * g[k][1];
                }
                out
            })
            .collect()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut min = f64::INFINITY;
        for tri in &self.triangles {
            for k in 0..3 {
                let p = self.nodes[tri[k]];
                let q = self.nodes[tri[(k + 1) % 3]];
                let r = self.nodes[tri[(k + 2) % 3]];
                let (u, v) = ([q[0] - p[0], q[1] - p[1]], [r[0] - p[0], r[1] - p[1]]);
                let cos = (u[0] * v[0] + u[1] * v[1]) / (norm(u) * norm(v));
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    pub fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::new(self))
    }

    pub(crate) fn csr_pattern(&self) -> &CsrPattern {
        self.pattern.get_or_init(|| CsrPattern::new(self))
    }
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let (a, b, c) = (nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn basis_gradients(nodes: &[[f64; 2]], tri: &[usize; 3], area: f64) -> [[f64; 2]; 3] {
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let p = nodes[tri[(k + 1) % 3]];
        let q = nodes[tri[(k + 2) % 3]];
        // Rotated opposite edge, scaled by 1/(2|T|).
        g[k] = [(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)];
    }
    g
}

fn bounding_box(nodes: &[[f64; 2]]) -> (f64, f64, f64, f64) {
    nodes.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(x0, x1, y0, y1), p| (x0.min(p[0]), x1.max(p[0]), y0.min(p[1]), y1.max(p[1])),
    )
}

fn hash_mesh(nodes: &[[f64; 2]], triangles: &[[usize; 3]]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update((nodes.len() as u64).to_le_bytes());
    for p in nodes {
        hasher.update(p[0].to_bits().to_le_bytes());
        hasher.update(p[1].to_bits().to_le_bytes());
    }
    hasher.update((triangles.len() as u64).to_le_bytes());
    for t in triangles {
        for &v in t {
            hasher.update((v as u64).to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}
