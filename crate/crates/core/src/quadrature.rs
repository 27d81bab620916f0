//! Edge-midpoint quadrature for integrals of nonlinear functions of P1
//! fields: `∫_T g(v) ≈ |T|/3 Σ_edges g(v(midpoint))`.

use crate::mesh::Mesh;

/// `∫ mask · g(v)` over the mesh with the edge-midpoint rule.
pub fn integrate_with(mesh: &Mesh, values: &[f64], mask: Option<&[f64]>, g: impl Fn(f64) -> f64) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let m = mask.map_or(1.0, |m| m[t]);
            if m == 0.0 {
                return 0.0;
            }
            let (a, b, c) = (values[tri[0]], values[tri[1]], values[tri[2]]);
            let s = g(0.5 * (a + b)) + g(0.5 * (b + c)) + g(0.5 * (c + a));
            m * mesh.areas()[t] / 3.0 * s
        })
        .sum()
}

/// `∫ |v|`.
pub fn l1_norm(mesh: &Mesh, values: &[f64], mask: Option<&[f64]>) -> f64 {
    integrate_with(mesh, values, mask, f64::abs)
}

/// `∫ √(v² + ε²)`.
pub fn smoothed_l1_norm(mesh: &Mesh, values: &[f64], mask: Option<&[f64]>, eps: f64) -> f64 {
    integrate_with(mesh, values, mask, |v| v.hypot(eps))
}
