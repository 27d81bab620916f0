use super::{Mesh, LOCATE_TOL};
use crate::error::{AetError, Result};
use crate::field::NodalField;

/// Containing triangle and barycentric coordinates of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLocation {
    pub triangle_index: usize,
    pub barycentric: [f64; 3],
}

/// Uniform background grid over the mesh bounding box; every cell lists the
/// triangles whose (slightly inflated) bounding boxes overlap it.
#[derive(Debug)]
pub struct Locator {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    tol: f64,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let tol = LOCATE_TOL * mesh.diameter();
        let (mut x0, mut x1, mut y0, mut y1) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in mesh.nodes() {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        // About two triangles per cell on quasi-uniform meshes.
        let target = (mesh.area() / mesh.num_triangles() as f64 * 2.0).sqrt();
        let cell = target.max(1e-12 * mesh.diameter());
        let nx = (((x1 - x0) / cell).ceil() as usize).max(1);
        let ny = (((y1 - y0) / cell).ceil() as usize).max(1);
        let mut loc = Self {
            origin: [x0, y0],
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
            tol,
        };
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let ps = tri.map(|v| mesh.nodes()[v]);
            let lo = [
                ps.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - tol,
                ps.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min) - tol,
            ];
            let hi = [
                ps.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) + tol,
                ps.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max) + tol,
            ];
            let (cx0, cy0) = loc.cell_of(lo);
            let (cx1, cy1) = loc.cell_of(hi);
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    loc.buckets[cy * nx + cx].push(t);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let fx = ((p[0] - self.origin[0]) / self.cell).floor();
        let fy = ((p[1] - self.origin[1]) / self.cell).floor();
        (
            (fx.max(0.0) as usize).min(self.nx - 1),
            (fy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Locates `p`; ties on shared edges or nodes go to the lowest triangle
    /// index.
    pub fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Result<PointLocation> {
        let (cx, cy) = self.cell_of(p);
        // Buckets are filled in ascending triangle order.
        for &t in &self.buckets[cy * self.nx + cx] {
            let bary = barycentric(mesh, t, p);
            if bary.iter().all(|&b| b >= -self.tol) {
                return Ok(PointLocation {
                    triangle_index: t,
                    barycentric: normalize(bary),
                });
            }
        }
        Err(AetError::PointNotFound { x: p[0], y: p[1] })
    }
}

pub(crate) fn barycentric(mesh: &Mesh, t: usize, p: [f64; 2]) -> [f64; 3] {
    let tri = mesh.triangles()[t];
    let g = mesh.basis_gradients()[t];
    let a = mesh.nodes()[tri[0]];
    // λ_k(p) = λ_k(a) + ∇λ_k · (p - a)
    let d = [p[0] - a[0], p[1] - a[1]];
    let l1 = g[1][0] * d[0] + g[1][1] * d[1];
    let l2 = g[2][0] * d[0] + g[2][1] * d[1];
    [1.0 - l1 - l2, l1, l2]
}

fn normalize(b: [f64; 3]) -> [f64; 3] {
    // The last coordinate absorbs rounding so the sum is exactly one.
    let b0 = b[0];
    let b1 = b[1];
    [b0, b1, 1.0 - b0 - b1]
}

impl Mesh {
    pub fn locate_point(&self, p: [f64; 2]) -> Result<PointLocation> {
        self.locator().locate(self, p)
    }
}

/// Evaluates a P1 field of `src_mesh` at the nodes of `dst_mesh`.
///
/// Destination nodes outside the source polygon by at most `h_src²` are
/// projected onto the nearest boundary edge.
pub fn interpolate_p1(
    src_mesh: &Mesh,
    src_field: &NodalField,
    dst_mesh: &Mesh,
) -> Result<NodalField> {
    src_field.check_mesh(src_mesh)?;
    if src_mesh.id() == dst_mesh.id() {
        return Ok(src_field.clone());
    }
    let clamp_tol = src_mesh.h() * src_mesh.h();
    let values = dst_mesh
        .nodes()
        .iter()
        .map(|&p| match src_mesh.locate_point(p) {
            Ok(loc) => {
                let tri = src_mesh.triangles()[loc.triangle_index];
                Ok((0..3).map(|k| loc.barycentric[k] * src_field[tri[k]]).sum())
            }
            Err(err) => {
                let (d, a, b) = nearest_boundary_edge(src_mesh, p);
                if d > clamp_tol {
                    return Err(err);
                }
                // Extend the P1 polynomial of the boundary triangle owning
                // the edge, which keeps affine fields exact.
                let t = edge_triangle(src_mesh, a, b);
                let tri = src_mesh.triangles()[t];
                let bary = barycentric(src_mesh, t, p);
                Ok((0..3).map(|k| bary[k] * src_field[tri[k]]).sum())
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(NodalField::from_raw(dst_mesh, values))
}

/// Distance to the closest boundary edge and that edge's endpoints.
fn nearest_boundary_edge(mesh: &Mesh, p: [f64; 2]) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for &[a, b] in mesh.boundary_edges() {
        let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
        let e = [pb[0] - pa[0], pb[1] - pa[1]];
        let len2 = e[0] * e[0] + e[1] * e[1];
        let s = (((p[0] - pa[0]) * e[0] + (p[1] - pa[1]) * e[1]) / len2).clamp(0.0, 1.0);
        let q = [pa[0] + s * e[0], pa[1] + s * e[1]];
        let d = super::dist(p, q);
        if d < best.0 {
            best = (d, a, b);
        }
    }
    best
}

fn edge_triangle(mesh: &Mesh, a: usize, b: usize) -> usize {
    *mesh.node_triangles()[a]
        .iter()
        .find(|&&t| mesh.triangles()[t].contains(&b))
        .expect("boundary edge belongs to a triangle")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk_mesh;

    #[test]
    fn centroid_of_first_triangle() {
        let m = generate_disk_mesh(0.2).unwrap();
        let loc = m.locate_point(m.centroid(0)).unwrap();
        assert_eq!(loc.triangle_index, 0);
        for b in loc.barycentric {
            assert!((b - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_node_goes_to_lowest_triangle() {
        let m = generate_disk_mesh(0.2).unwrap();
        for v in [0usize, 7, 20] {
            let loc = m.locate_point(m.nodes()[v]).unwrap();
            assert_eq!(loc.triangle_index, m.node_triangles()[v][0]);
            let tri = m.triangles()[loc.triangle_index];
            let k = tri.iter().position(|&x| x == v).unwrap();
            assert!((loc.barycentric[k] - 1.0).abs() < 1e-12);
            assert!((loc.barycentric.iter().sum::<f64>() - 1.0).abs() == 0.0);
        }
    }

    #[test]
    fn outside_point_is_not_found() {
        let m = generate_disk_mesh(0.2).unwrap();
        assert!(matches!(
            m.locate_point([1.5, 0.0]),
            Err(AetError::PointNotFound { .. })
        ));
    }

    #[test]
    fn identical_meshes_map_identically() {
        let m = generate_disk_mesh(0.2).unwrap();
        let f = NodalField::from_fn(&m, |p| p[0] * p[1] + 3.0);
        assert_eq!(interpolate_p1(&m, &f, &m).unwrap(), f);
    }

    #[test]
    fn affine_fields_are_reproduced() {
        let fine = generate_disk_mesh(0.07).unwrap();
        let coarse = generate_disk_mesh(0.15).unwrap();
        let affine = |p: [f64; 2]| 0.3 + 1.7 * p[0] - 0.4 * p[1];
        let src = NodalField::from_fn(&fine, affine);
        let dst = interpolate_p1(&fine, &src, &coarse).unwrap();
        for (i, &p) in coarse.nodes().iter().enumerate() {
            assert!((dst[i] - affine(p)).abs() < 1e-12);
        }
    }
}
