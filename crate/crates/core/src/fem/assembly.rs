use super::SparseMatrix;
use crate::error::{AetError, Result};
use crate::field::{ElementField, NodalField};
use crate::mesh::{dist, Mesh};

/// Weighted P1 stiffness `A_ij = Σ_T c_T |T| ∇φ_i·∇φ_j`.
pub fn assemble_stiffness(mesh: &Mesh, coeff: &ElementField) -> Result<SparseMatrix> {
    if coeff.len() != mesh.num_triangles() {
        return Err(AetError::Dimension {
            expected: mesh.num_triangles(),
            found: coeff.len(),
        });
    }
    if let Some(t) = coeff.iter().position(|&c| !(c > 0.0)) {
        return Err(AetError::Domain(format!(
            "stiffness coefficient {} on triangle {t} is not positive",
            coeff[t]
        )));
    }
    Ok(stiffness_unchecked(mesh, coeff))
}

pub(crate) fn stiffness_unchecked(mesh: &Mesh, coeff: &[f64]) -> SparseMatrix {
    let pattern = mesh.csr_pattern();
    let mut k = pattern.empty_matrix();
    let values = k.values_mut();
    for (t, slots) in pattern.slots().iter().enumerate() {
        let g = &mesh.basis_gradients()[t];
        let scale = coeff[t] * mesh.areas()[t];
        for a in 0..3 {
            for b in 0..3 {
                values[slots[3 * a + b]] += scale * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    }
    k
}

/// Lumped boundary mass: half the length of the boundary edges at each node.
pub fn assemble_lumped_boundary_mass(mesh: &Mesh) -> NodalField {
    let mut m = vec![0.0; mesh.num_nodes()];
    for &[a, b] in mesh.boundary_edges() {
        let half = 0.5 * dist(mesh.nodes()[a], mesh.nodes()[b]);
        m[a] += half;
        m[b] += half;
    }
    NodalField::from_raw(mesh, m)
}

/// Row-sum lumped area mass, `m_i = |patch_i| / 3`.
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    mesh.patch_areas().iter().map(|a| a / 3.0).collect()
}

/// Boundary load `b_i = ∫_Γ f φ_i ds` by two-point Gauss quadrature per
/// edge, corrected so that `Σ b_i = 0`.
pub fn assemble_flux_load(mesh: &Mesh, flux: impl Fn([f64; 2]) -> f64) -> NodalField {
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut b = vec![0.0; mesh.num_nodes()];
    for &[i, j] in mesh.boundary_edges() {
        let (p, q) = (mesh.nodes()[i], mesh.nodes()[j]);
        let half_len = 0.5 * dist(p, q);
        for s in gauss {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let fx = flux(x) * half_len;
            b[i] += fx * (1.0 - s);
            b[j] += fx * s;
        }
    }
    let m = assemble_lumped_boundary_mass(mesh);
    let shift = b.iter().sum::<f64>() / m.iter().sum::<f64>();
    for (bi, mi) in b.iter_mut().zip(m.iter()) {
        *bi -= shift * mi;
    }
    NodalField::from_raw(mesh, b)
}
