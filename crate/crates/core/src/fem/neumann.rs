use super::cg::{cg_solve, CgOptions, CgReport};
use super::SparseMatrix;
use crate::error::{AetError, Result};
use crate::field::NodalField;

/// Solver settings for the pure Neumann problem.
#[derive(Debug, Clone)]
pub struct NeumannOptions {
    pub tol: f64,
    /// Defaults to `10 √n`.
    pub maxit: Option<usize>,
    pub jacobi: bool,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            maxit: None,
            jacobi: false,
        }
    }
}

impl NeumannOptions {
    pub fn maxit_for(&self, n: usize) -> usize {
        self.maxit
            .unwrap_or_else(|| ((10.0 * (n as f64).sqrt()).ceil() as usize).max(1))
    }
}

const DEFLATE_EVERY: usize = 20;

/// Solves `K u = b` for a stiffness matrix with constant kernel and a
/// compatible load, then fixes the gauge `Σ m_i u_i = 0`.
pub fn solve_neumann(
    k: &SparseMatrix,
    b: &NodalField,
    boundary_mass: &NodalField,
    opts: &NeumannOptions,
) -> Result<(NodalField, CgReport)> {
    let n = k.dim();
    if b.len() != n || boundary_mass.len() != n {
        return Err(AetError::Dimension {
            expected: n,
            found: if b.len() != n { b.len() } else { boundary_mass.len() },
        });
    }
    let (u, report) = solve_neumann_raw(k, b, boundary_mass, opts)?;
    Ok((NodalField::with_id(b.mesh_id(), u), report))
}

pub(crate) fn solve_neumann_raw(
    k: &SparseMatrix,
    b: &[f64],
    boundary_mass: &[f64],
    opts: &NeumannOptions,
) -> Result<(Vec<f64>, CgReport)> {
    let n = k.dim();
    let cg = CgOptions {
        tol: opts.tol,
        maxit: opts.maxit_for(n),
        inv_diag: opts
            .jacobi
            .then(|| k.diagonal().iter().map(|d| 1.0 / d).collect()),
        deflate_constants_every: Some(DEFLATE_EVERY),
    };
    let sol = cg_solve(
        |x, y| {
            k.mul_vec(x, y);
            Ok(())
        },
        b,
        None,
        &cg,
    )?;
    if !sol.report.converged {
        log::debug!(
            "Neumann solve stopped after {} iterations at relative residual {:.3e}",
            sol.report.iterations,
            sol.report.residual
        );
    }
    let mut u = sol.x;
    let total: f64 = boundary_mass.iter().sum();
    let mean = u.iter().zip(boundary_mass).map(|(a, m)| a * m).sum::<f64>() / total;
    u.iter_mut().for_each(|v| *v -= mean);
    Ok((u, sol.report))
}
