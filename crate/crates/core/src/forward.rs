//! The power-density forward map `H(σ) = σ|∇u(σ)|²` in discrete P1 form,
//! its directional derivative and the exact discrete adjoint.
//!
//! σ enters the stiffness matrix through vertex averages per triangle.
//! `|∇u|²` is constant per triangle and is brought back to the nodes by the
//! area-weighted patch average
//!
//! ```text
//! r_i = Σ_{T∋i} |T| |∇u_T|² / Σ_{T∋i} |T|,      H_i = σ_i r_i.
//! ```
//!
//! [`linearized_forward`] is the exact derivative of this discrete map and
//! [`adjoint_applied`] is its exact adjoint under the lumped-mass pairing
//! `⟨a, b⟩_M = Σ m_i a_i b_i` with `m_i = |patch_i| / 3`.

use std::sync::Arc;

use crate::error::{AetError, Result};
use crate::fem::{
    assemble_flux_load, assemble_lumped_boundary_mass, assemble_stiffness, lumped_mass, CgReport,
    NeumannOptions, SparseMatrix,
};
use crate::fem::neumann_raw;
use crate::field::{vertex_average, ElementField, NodalField};
use crate::mesh::Mesh;

#[derive(Debug, Clone)]
pub struct ForwardOptions {
    pub solver: NeumannOptions,
    pub box_low: f64,
    pub box_high: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            solver: NeumannOptions::default(),
            box_low: f64::MIN_POSITIVE,
            box_high: f64::INFINITY,
        }
    }
}

/// Quantities shared by every flux at a fixed conductivity.
#[derive(Debug)]
pub struct ForwardOperator {
    mesh_id: u64,
    sigma: NodalField,
    sigma_elem: ElementField,
    stiffness: SparseMatrix,
    boundary_mass: NodalField,
    solver: NeumannOptions,
}

impl ForwardOperator {
    pub fn new(mesh: &Mesh, sigma: &NodalField, opts: &ForwardOptions) -> Result<Self> {
        sigma.check_mesh(mesh)?;
        if let Some(i) = sigma
            .iter()
            .position(|&s| !(s >= opts.box_low && s <= opts.box_high))
        {
            return Err(AetError::Domain(format!(
                "conductivity {} at node {i} is outside [{}, {}]",
                sigma[i], opts.box_low, opts.box_high
            )));
        }
        let sigma_elem = sigma.to_elements(mesh);
        let stiffness = assemble_stiffness(mesh, &sigma_elem)?;
        Ok(Self {
            mesh_id: mesh.id(),
            sigma: sigma.clone(),
            sigma_elem,
            stiffness,
            boundary_mass: assemble_lumped_boundary_mass(mesh),
            solver: opts.solver.clone(),
        })
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn sigma(&self) -> &NodalField {
        &self.sigma
    }

    fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, CgReport)> {
        neumann_raw(&self.stiffness, rhs, &self.boundary_mass, &self.solver)
    }

    /// Forward solution for one boundary flux.
    pub fn solve_flux(
        self: &Arc<Self>,
        mesh: &Mesh,
        flux: impl Fn([f64; 2]) -> f64,
    ) -> Result<ForwardSolution> {
        if mesh.id() != self.mesh_id {
            return Err(AetError::MeshMismatch {
                expected: self.mesh_id,
                found: mesh.id(),
            });
        }
        let load = assemble_flux_load(mesh, flux);
        let (u, report) = self.solve(&load)?;
        let grad_u = mesh.gradients(&u);
        let grad_sq: Vec<f64> = grad_u.iter().map(|g| g[0] * g[0] + g[1] * g[1]).collect();
        let recovered = recover(mesh, &grad_sq);
        let h = self
            .sigma
            .iter()
            .zip(&recovered)
            .map(|(s, r)| s * r)
            .collect();
        Ok(ForwardSolution {
            u: NodalField::from_raw(mesh, u),
            grad_u,
            h: NodalField::from_raw(mesh, h),
            sigma_elem: self.sigma_elem.clone(),
            grad_sq_recovered: recovered,
            operator: Arc::clone(self),
            report,
        })
    }
}

/// Potential, its element gradients and the power density for one flux.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub u: NodalField,
    pub grad_u: Vec<[f64; 2]>,
    pub h: NodalField,
    pub sigma_elem: ElementField,
    /// Nodal recovery `r_i` of `|∇u|²`.
    pub grad_sq_recovered: Vec<f64>,
    pub report: CgReport,
    operator: Arc<ForwardOperator>,
}

impl ForwardSolution {
    pub fn operator(&self) -> &ForwardOperator {
        &self.operator
    }

    pub fn sigma(&self) -> &NodalField {
        &self.operator.sigma
    }

    fn check(&self, mesh: &Mesh, field: &NodalField) -> Result<()> {
        field.check_mesh(mesh)?;
        if mesh.id() != self.operator.mesh_id {
            return Err(AetError::MeshMismatch {
                expected: self.operator.mesh_id,
                found: mesh.id(),
            });
        }
        Ok(())
    }
}

/// Solves the forward problem for one flux.
pub fn solve_forward(
    mesh: &Mesh,
    sigma: &NodalField,
    flux: impl Fn([f64; 2]) -> f64,
    opts: &ForwardOptions,
) -> Result<ForwardSolution> {
    Arc::new(ForwardOperator::new(mesh, sigma, opts)?).solve_flux(mesh, flux)
}

/// Area-weighted patch average of an element field.
pub fn recover(mesh: &Mesh, elem: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = mesh.areas()[t] * elem[t];
        for &v in tri {
            out[v] += w;
        }
    }
    out.iter_mut()
        .zip(mesh.patch_areas())
        .for_each(|(o, a)| *o /= a);
    out
}

/// `H'(σ)[κ] = κ|∇u|² + 2σ∇u·∇u'` with `(σ∇u', ∇φ) = -(κ∇u, ∇φ)`.
pub fn linearized_forward(mesh: &Mesh, fs: &ForwardSolution, kappa: &NodalField) -> Result<NodalField> {
    fs.check(mesh, kappa)?;
    Ok(NodalField::from_raw(mesh, apply_derivative(mesh, fs, kappa)?))
}

pub(crate) fn apply_derivative(mesh: &Mesh, fs: &ForwardSolution, kappa: &[f64]) -> Result<Vec<f64>> {
    let sigma = &fs.operator.sigma;
    if kappa.iter().all(|&k| k == 0.0) {
        return Ok(vec![0.0; mesh.num_nodes()]);
    }
    let kappa_elem = vertex_average(mesh, kappa);
    let mut rhs = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let s = -kappa_elem[t] * mesh.areas()[t];
        let gu = fs.grad_u[t];
        let g = &mesh.basis_gradients()[t];
        for k in 0..3 {
            rhs[tri[k]] += s * (gu[0] * g[k][0] + gu[1] * g[k][1]);
        }
    }
    let (du, _) = fs.operator.solve(&rhs)?;
    let grad_du = mesh.gradients(&du);
    let dq: Vec<f64> = fs
        .grad_u
        .iter()
        .zip(&grad_du)
        .map(|(a, b)| 2.0 * (a[0] * b[0] + a[1] * b[1]))
        .collect();
    let rdq = recover(mesh, &dq);
    Ok((0..mesh.num_nodes())
        .map(|i| kappa[i] * fs.grad_sq_recovered[i] + sigma[i] * rdq[i])
        .collect())
}

/// Euclidean transpose of the derivative matrix applied to `y`.
pub(crate) fn apply_derivative_transpose(mesh: &Mesh, fs: &ForwardSolution, y: &[f64]) -> Result<Vec<f64>> {
    let sigma = &fs.operator.sigma;
    let n = mesh.num_nodes();
    if y.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; n]);
    }
    let patch = mesh.patch_areas();
    // c_T = |T| Σ_{i∈T} σ_i y_i / |patch_i|
    let mut rhs = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c: f64 = tri.iter().map(|&i| sigma[i] * y[i] / patch[i]).sum::<f64>() * mesh.areas()[t];
        let gu = fs.grad_u[t];
        let g = &mesh.basis_gradients()[t];
        for k in 0..3 {
            rhs[tri[k]] -= c * (gu[0] * g[k][0] + gu[1] * g[k][1]);
        }
    }
    let (v, _) = fs.operator.solve(&rhs)?;
    let grad_v = mesh.gradients(&v);
    let mut out: Vec<f64> = (0..n).map(|i| y[i] * fs.grad_sq_recovered[i]).collect();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (a, b) = (fs.grad_u[t], grad_v[t]);
        let w = 2.0 / 3.0 * mesh.areas()[t] * (a[0] * b[0] + a[1] * b[1]);
        for &i in tri {
            out[i] += w;
        }
    }
    Ok(out)
}

/// `H'(σ)*ζ = |∇u|²ζ + 2∇u·∇v` with `(σ∇v, ∇φ) = -(σζ∇u, ∇φ)`, the adjoint
/// of [`linearized_forward`] under the lumped-mass pairing.
pub fn adjoint_applied(mesh: &Mesh, fs: &ForwardSolution, zeta: &NodalField) -> Result<NodalField> {
    fs.check(mesh, zeta)?;
    let m = lumped_mass(mesh);
    let y: Vec<f64> = zeta.iter().zip(&m).map(|(z, m)| z * m).collect();
    let mut out = apply_derivative_transpose(mesh, fs, &y)?;
    out.iter_mut().zip(&m).for_each(|(o, m)| *o /= m);
    Ok(NodalField::from_raw(mesh, out))
}

/// Lumped-mass inner product.
pub fn mass_inner(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    mesh.patch_areas()
        .iter()
        .zip(a.iter().zip(b))
        .map(|(p, (x, y))| p / 3.0 * x * y)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk_mesh;

    fn x1(p: [f64; 2]) -> f64 {
        p[0]
    }

    #[test]
    fn unit_conductivity_gives_unit_density() {
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let mesh = generate_disk_mesh(h).unwrap();
            let fs = solve_forward(&mesh, &NodalField::constant(&mesh, 1.0), x1, &Default::default()).unwrap();
            let err = fs.h.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            assert!(err <= 3.0 * h, "h={h}: {err}");
            assert!(fs.h.iter().all(|&v| v >= 0.0));
            errs.push(err);
        }
        let rot = generate_disk_mesh(0.1).unwrap();
        let f3 = |p: [f64; 2]| (p[0] + p[1]) / 2f64.sqrt();
        let fs = solve_forward(&rot, &NodalField::constant(&rot, 1.0), f3, &Default::default()).unwrap();
        let err = fs.h.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(err <= 0.3, "{err}");
    }

    #[test]
    fn recovery_exact_for_affine_potential() {
        let mesh = generate_disk_mesh(0.2).unwrap();
        let elem = vec![2.5; mesh.num_triangles()];
        assert!(recover(&mesh, &elem).iter().all(|&v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn rejects_out_of_box_conductivity() {
        let mesh = generate_disk_mesh(0.3).unwrap();
        let mut sigma = NodalField::constant(&mesh, 1.0);
        sigma[5] = 3.0;
        let opts = ForwardOptions {
            box_low: 0.2,
            box_high: 1.5,
            ..Default::default()
        };
        let err = solve_forward(&mesh, &sigma, x1, &opts).unwrap_err();
        assert!(err.to_string().contains("node 5"), "{err}");
    }

    #[test]
    fn zero_directions() {
        let mesh = generate_disk_mesh(0.3).unwrap();
        let fs = solve_forward(&mesh, &NodalField::constant(&mesh, 1.0), x1, &Default::default()).unwrap();
        let zero = NodalField::zeros(&mesh);
        assert!(linearized_forward(&mesh, &fs, &zero).unwrap().iter().all(|&v| v == 0.0));
        assert!(adjoint_applied(&mesh, &fs, &zero).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mesh_mismatch_is_rejected() {
        let a = generate_disk_mesh(0.3).unwrap();
        let b = generate_disk_mesh(0.25).unwrap();
        let fs = solve_forward(&a, &NodalField::constant(&a, 1.0), x1, &Default::default()).unwrap();
        assert!(matches!(
            linearized_forward(&a, &fs, &NodalField::zeros(&b)),
            Err(AetError::MeshMismatch { .. })
        ));
    }
}
