//! Conductivity reconstruction from interior power-density data.
//!
//! The crate covers the whole pipeline of an acousto-electric tomography
//! experiment on a two-dimensional domain:
//!
//! * [`mesh`]: triangulations, disk meshing, MSH 2.2 input/output, point
//!   location and cross-mesh P1 interpolation.
//! * [`fem`]: P1 assembly, conjugate gradients and the gauge-fixed Neumann
//!   solve.
//! * [`forward`]: the power-density map `H(σ) = σ|∇u(σ)|²`, its derivative
//!   and the exact discrete adjoint of that derivative.
//! * [`recon`]: total-variation regularized L¹ fitting by recursive
//!   linearization and iterative reweighting with matrix-free CG.
//! * [`phantom`]: phantoms, boundary fluxes, noise and partial-data masks.
//! * [`metrics`] and [`io`]: error metrics and file export.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem;
pub mod field;
pub mod forward;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod phantom;
pub mod quadrature;
pub mod recon;
pub mod rng;

pub use error::{AetError, Result};
pub use field::{ElementField, NodalField};
pub use mesh::Mesh;
