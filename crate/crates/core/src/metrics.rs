//! Reconstruction error metrics: L¹ distance, total-variation gap and their
//! sum, the BV-type distance `d_BV(σ, η) = ‖σ − η‖_{L¹} + ||σ|_TV − |η|_TV|`.

use crate::error::Result;
use crate::field::NodalField;
use crate::mesh::Mesh;
use crate::quadrature::l1_norm;
use crate::recon::tv_seminorm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTriple {
    pub e_l1: f64,
    pub e_tv: f64,
    pub e_dbv: f64,
}

pub fn error_metrics(mesh: &Mesh, sigma: &NodalField, truth: &NodalField) -> Result<ErrorTriple> {
    error_metrics_masked(mesh, sigma, truth, None)
}

/// As [`error_metrics`], with the L¹ term restricted to an element mask.
pub fn error_metrics_masked(
    mesh: &Mesh,
    sigma: &NodalField,
    truth: &NodalField,
    mask: Option<&[f64]>,
) -> Result<ErrorTriple> {
    sigma.check_mesh(mesh)?;
    truth.check_mesh(mesh)?;
    let diff: Vec<f64> = sigma.iter().zip(truth.iter()).map(|(a, b)| a - b).collect();
    let e_l1 = l1_norm(mesh, &diff, mask);
    let e_tv = (tv_seminorm(mesh, sigma) - tv_seminorm(mesh, truth)).abs();
    Ok(ErrorTriple {
        e_l1,
        e_tv,
        e_dbv: e_l1 + e_tv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk_mesh;

    #[test]
    fn identical_fields() {
        let m = generate_disk_mesh(0.2).unwrap();
        let s = NodalField::from_fn(&m, |p| 1.0 + p[0] * p[1]);
        let e = error_metrics(&m, &s, &s).unwrap();
        assert_eq!((e.e_l1, e.e_tv, e.e_dbv), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_offset() {
        let m = generate_disk_mesh(0.2).unwrap();
        let truth = NodalField::from_fn(&m, |p| 1.0 + p[0]);
        let sigma = truth.map(|v| v + 0.25);
        let e = error_metrics(&m, &sigma, &truth).unwrap();
        assert!((e.e_l1 - 0.25 * m.area()).abs() < 1e-12);
        assert!(e.e_tv < 1e-12);
        assert_eq!(e.e_dbv, e.e_l1 + e.e_tv);
    }

    #[test]
    fn doubling_doubles_tv() {
        let m = generate_disk_mesh(0.2).unwrap();
        let truth = NodalField::from_fn(&m, |p| p[0]);
        let e = error_metrics(&m, &truth.map(|v| 2.0 * v), &truth).unwrap();
        assert!((e.e_tv - m.area()).abs() < 1e-12);
    }
}
