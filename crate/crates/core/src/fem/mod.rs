//! P1 finite element machinery: sparse storage, assembly, conjugate
//! gradients and the gauge-fixed pure Neumann solve.

mod assembly;
mod cg;
mod neumann;
mod sparse;

pub use assembly::{
    assemble_flux_load, assemble_lumped_boundary_mass, assemble_stiffness, lumped_mass,
};
pub use cg::{cg_solve, CgOptions, CgReport, CgSolution};
pub use neumann::{solve_neumann, NeumannOptions};
pub(crate) use neumann::solve_neumann_raw as neumann_raw;
pub use sparse::SparseMatrix;
pub(crate) use assembly::stiffness_unchecked;
pub(crate) use sparse::CsrPattern;
