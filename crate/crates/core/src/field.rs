//! Scalar fields bound to a mesh: P1 (one value per node) and P0 (one value
//! per triangle).

use std::ops::{Deref, DerefMut};

use crate::error::{AetError, Result};
use crate::mesh::Mesh;

/// P1 field: one value per mesh node, tagged with the id of its mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    mesh_id: u64,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(AetError::Dimension {
                expected: mesh.num_nodes(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AetError::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Self {
            mesh_id: mesh.id(),
            values,
        })
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Self {
            mesh_id: mesh.id(),
            values: vec![value; mesh.num_nodes()],
        }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    /// Nodal interpolant of a pointwise function.
    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            mesh_id: mesh.id(),
            values: mesh.nodes().iter().map(|&p| f(p)).collect(),
        }
    }

    /// Wraps values without the finiteness scan; length must match.
    pub(crate) fn from_raw(mesh: &Mesh, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), mesh.num_nodes());
        Self {
            mesh_id: mesh.id(),
            values,
        }
    }

    pub(crate) fn with_id(mesh_id: u64, values: Vec<f64>) -> Self {
        Self { mesh_id, values }
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(AetError::MeshMismatch {
                expected: mesh.id(),
                found: self.mesh_id,
            });
        }
        Ok(())
    }

    /// Per-triangle average of the three vertex values.
    pub fn to_elements(&self, mesh: &Mesh) -> ElementField {
        ElementField {
            values: vertex_average(mesh, &self.values),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mesh_id: self.mesh_id,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &NodalField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            mesh_id: self.mesh_id,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Deref for NodalField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for NodalField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// P0 field: one value per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementField {
    values: Vec<f64>,
}

impl ElementField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_triangles() {
            return Err(AetError::Dimension {
                expected: mesh.num_triangles(),
                found: values.len(),
            });
        }
        if let Some(t) = values.iter().position(|v| !v.is_finite()) {
            return Err(AetError::Domain(format!("non-finite value at triangle {t}")));
        }
        Ok(Self { values })
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Self {
            values: vec![value; mesh.num_triangles()],
        }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for ElementField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn vertex_average(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|t| (nodal[t[0]] + nodal[t[1]] + nodal[t[2]]) / 3.0)
        .collect()
}
