//! Phantoms, boundary fluxes, measurement noise, partial-data masks and the
//! two-mesh data simulation pipeline.
//!
//! Only the tissue conductivities of the head model are taken from the
//! literature; both phantom geometries are simple analytic stand-ins.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{AetError, Result};
use crate::field::{ElementField, NodalField};
use crate::forward::{ForwardOperator, ForwardOptions};
use crate::mesh::{interpolate_p1, Mesh};
use crate::recon::Dataset;
use crate::rng::SplitMix64;

/// The four boundary current patterns `x₁`, `x₂`, `(x₁+x₂)/√2`, `(x₁−x₂)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryFlux {
    X1,
    X2,
    Diagonal,
    AntiDiagonal,
}

impl BoundaryFlux {
    pub const ALL: [BoundaryFlux; 4] = [Self::X1, Self::X2, Self::Diagonal, Self::AntiDiagonal];

    /// Flux by its 1-based index.
    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            1 => Ok(Self::X1),
            2 => Ok(Self::X2),
            3 => Ok(Self::Diagonal),
            4 => Ok(Self::AntiDiagonal),
            _ => Err(AetError::Domain(format!("boundary flux index {index} is not in 1..=4"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Self::X1 => 1,
            Self::X2 => 2,
            Self::Diagonal => 3,
            Self::AntiDiagonal => 4,
        }
    }

    pub fn eval(self, p: [f64; 2]) -> f64 {
        match self {
            Self::X1 => p[0],
            Self::X2 => p[1],
            Self::Diagonal => (p[0] + p[1]) * FRAC_1_SQRT_2,
            Self::AntiDiagonal => (p[0] - p[1]) * FRAC_1_SQRT_2,
        }
    }
}

pub fn boundary_flux(index: usize) -> Result<BoundaryFlux> {
    BoundaryFlux::from_index(index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Constant,
    Shapes,
    Head,
}

impl FromStr for PhantomKind {
    type Err = AetError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "shapes" => Ok(Self::Shapes),
            "head" => Ok(Self::Head),
            other => Err(AetError::Domain(format!(
                "unknown phantom `{other}` (expected constant, shapes or head)"
            ))),
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Shapes => "shapes",
            Self::Head => "head",
        })
    }
}

/// Tissue conductivities of the layered head model.
pub mod tissue {
    pub const AIR: f64 = 0.4;
    pub const SCALP: f64 = 0.5232;
    pub const SKULL: f64 = 0.2983;
    pub const SPINAL_FLUID: f64 = 1.0143;
    pub const GRAY_MATTER: f64 = 0.55946;
    pub const WHITE_MATTER: f64 = 0.32404;
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub kind: PhantomKind,
    pub sigma: NodalField,
    /// Region names and their conductivities, outermost first.
    pub regions: Vec<(&'static str, f64)>,
}

impl Phantom {
    /// Same phantom sampled on another mesh.
    pub fn on_mesh(&self, mesh: &Mesh) -> Phantom {
        make_phantom(self.kind, mesh)
    }
}

/// Conductivity of a phantom at a point.
pub fn phantom_value(kind: PhantomKind, p: [f64; 2]) -> f64 {
    match kind {
        PhantomKind::Constant => 1.0,
        PhantomKind::Shapes => shapes_value(p),
        PhantomKind::Head => head_value(p),
    }
}

fn shapes_value([x, y]: [f64; 2]) -> f64 {
    if (x + 0.35).powi(2) + (y - 0.35).powi(2) <= 0.25 * 0.25 {
        return 1.2;
    }
    if (x - 0.4).abs() <= 0.2 && (y - 0.3).abs() <= 0.2 {
        return 0.6;
    }
    // Equilateral triangle, centroid (0, -0.45), circumradius 0.3, apex up.
    let (cx, cy, r) = (0.0, -0.45, 0.3);
    let verts: Vec<[f64; 2]> = [90f64, 210.0, 330.0]
        .iter()
        .map(|a| {
            let (s, c) = a.to_radians().sin_cos();
            [cx + r * c, cy + r * s]
        })
        .collect();
    let inside = (0..3).all(|k| {
        let (a, b) = (verts[k], verts[(k + 1) % 3]);
        (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) >= 0.0
    });
    if inside {
        0.8
    } else {
        1.0
    }
}

fn head_value([x, y]: [f64; 2]) -> f64 {
    use tissue::*;
    let inside = |a: f64, b: f64| (x / a).powi(2) + (y / b).powi(2) <= 1.0;
    if inside(0.42, 0.55) {
        WHITE_MATTER
    } else if inside(0.60, 0.74) {
        GRAY_MATTER
    } else if inside(0.66, 0.80) {
        SPINAL_FLUID
    } else if inside(0.72, 0.86) {
        SKULL
    } else if inside(0.78, 0.92) {
        SCALP
    } else {
        AIR
    }
}

/// Nodal samples of a named phantom.
pub fn make_phantom(kind: PhantomKind, mesh: &Mesh) -> Phantom {
    use tissue::*;
    let regions = match kind {
        PhantomKind::Constant => vec![("background", 1.0)],
        PhantomKind::Shapes => vec![
            ("background", 1.0),
            ("disk", 1.2),
            ("square", 0.6),
            ("triangle", 0.8),
        ],
        PhantomKind::Head => vec![
            ("air", AIR),
            ("scalp", SCALP),
            ("skull", SKULL),
            ("spinal fluid", SPINAL_FLUID),
            ("gray matter", GRAY_MATTER),
            ("white matter", WHITE_MATTER),
        ],
    };
    Phantom {
        kind,
        sigma: NodalField::from_fn(mesh, |p| phantom_value(kind, p)),
        regions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub delta_e: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            delta_e: 0.0,
            seed: 0,
        }
    }
}

/// `H̃ = H + δ_e (‖H‖₂ / ‖e‖₂) e` with `e` standard normal per entry.
pub fn add_noise(h: &NodalField, spec: &NoiseSpec) -> Result<NodalField> {
    if !(spec.delta_e >= 0.0) {
        return Err(AetError::Domain(format!("noise level {} is negative", spec.delta_e)));
    }
    if spec.delta_e == 0.0 {
        return Ok(h.clone());
    }
    let h_norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    if h_norm == 0.0 {
        return Err(AetError::Domain("cannot scale relative noise for zero data".into()));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let e: Vec<f64> = (0..h.len()).map(|_| rng.next_gaussian()).collect();
    let e_norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = spec.delta_e * h_norm / e_norm;
    let mut out = h.clone();
    out.iter_mut().zip(&e).for_each(|(v, ei)| *v += scale * ei);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskKind {
    Full,
    /// Concentric disk of the given radius.
    InnerDisk { radius: f64 },
    /// Right half `x₁ ≥ 0`.
    HalfDisk,
}

/// Element mask: 1 where the centroid lies in the data region.
pub fn make_mask(kind: MaskKind, mesh: &Mesh) -> ElementField {
    let values = (0..mesh.num_triangles())
        .map(|t| {
            let c = mesh.centroid(t);
            let inside = match kind {
                MaskKind::Full => true,
                MaskKind::InnerDisk { radius } => c[0].hypot(c[1]) <= radius,
                MaskKind::HalfDisk => c[0] >= 0.0,
            };
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    ElementField::new(mesh, values).expect("finite mask")
}

/// Where noise is added in the two-mesh pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseStage {
    /// On the simulation mesh, before interpolation.
    #[default]
    Simulation,
    /// On the reconstruction mesh, after interpolation.
    Reconstruction,
}

/// Output of [`simulate_datasets`]: the datasets on the reconstruction mesh
/// and the noisy power densities on the simulation mesh.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub datasets: Vec<Dataset>,
    pub fine_data: Vec<NodalField>,
}

/// Synthesizes power-density data on `sim_mesh` and transfers it to
/// `recon_mesh`. Dataset `j` uses noise seed `noise.seed + flux index`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_datasets(
    sim_mesh: &Mesh,
    recon_mesh: &Mesh,
    phantom: &Phantom,
    fluxes: &[BoundaryFlux],
    noise: &NoiseSpec,
    stage: NoiseStage,
    mask: &ElementField,
    opts: &ForwardOptions,
) -> Result<Simulation> {
    if mask.len() != recon_mesh.num_triangles() {
        return Err(AetError::Dimension {
            expected: recon_mesh.num_triangles(),
            found: mask.len(),
        });
    }
    let sigma = if phantom.sigma.mesh_id() == sim_mesh.id() {
        phantom.sigma.clone()
    } else {
        phantom.on_mesh(sim_mesh).sigma
    };
    let op = std::sync::Arc::new(ForwardOperator::new(sim_mesh, &sigma, opts)?);
    let mut datasets = Vec::with_capacity(fluxes.len());
    let mut fine_data = Vec::with_capacity(fluxes.len());
    for (j, &flux) in fluxes.iter().enumerate() {
        let wrap = |e: AetError| AetError::Dataset {
            index: j,
            source: Box::new(e),
        };
        let fs = op.solve_flux(sim_mesh, |p| flux.eval(p)).map_err(wrap)?;
        let spec = NoiseSpec {
            delta_e: noise.delta_e,
            seed: noise.seed.wrapping_add(flux.index() as u64),
        };
        let (fine, z) = match stage {
            NoiseStage::Simulation => {
                let noisy = add_noise(&fs.h, &spec).map_err(wrap)?;
                let z = interpolate_p1(sim_mesh, &noisy, recon_mesh).map_err(wrap)?;
                (noisy, z)
            }
            NoiseStage::Reconstruction => {
                let z = interpolate_p1(sim_mesh, &fs.h, recon_mesh).map_err(wrap)?;
                (fs.h.clone(), add_noise(&z, &spec).map_err(wrap)?)
            }
        };
        fine_data.push(fine);
        datasets.push(Dataset::new(flux, z, mask.clone())?);
    }
    Ok(Simulation {
        datasets,
        fine_data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk_mesh;
    use crate::recon::tv_seminorm;

    #[test]
    fn flux_values() {
        assert_eq!(boundary_flux(1).unwrap().eval([0.6, 0.8]), 0.6);
        assert!((boundary_flux(3).unwrap().eval([1.0, 0.0]) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(boundary_flux(5).is_err());
        for f in BoundaryFlux::ALL {
            assert_eq!(BoundaryFlux::from_index(f.index()).unwrap(), f);
        }
    }

    #[test]
    fn flux_loads_are_compatible() {
        let m = generate_disk_mesh(0.1).unwrap();
        for f in BoundaryFlux::ALL {
            let b = crate::fem::assemble_flux_load(&m, |p| f.eval(p));
            assert!(b.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn phantoms() {
        let m = generate_disk_mesh(0.05).unwrap();
        let c = make_phantom(PhantomKind::Constant, &m);
        assert!(c.sigma.iter().all(|&v| v == 1.0));

        let s = make_phantom(PhantomKind::Shapes, &m);
        assert_eq!(s.sigma.min(), 0.6);
        assert_eq!(s.sigma.max(), 1.2);
        assert!(tv_seminorm(&m, &s.sigma) > 0.0);

        let h = make_phantom(PhantomKind::Head, &m);
        let mut values: Vec<f64> = h.sigma.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut expected = vec![0.4, 0.5232, 0.2983, 1.0143, 0.55946, 0.32404];
        expected.sort_by(f64::total_cmp);
        assert_eq!(values, expected);
        assert!("brain".parse::<PhantomKind>().is_err());
    }

    #[test]
    fn phantoms_are_reproducible() {
        let m = generate_disk_mesh(0.1).unwrap();
        let a = make_phantom(PhantomKind::Head, &m);
        let b = make_phantom(PhantomKind::Head, &m);
        assert_eq!(a.sigma, b.sigma);
    }

    #[test]
    fn noise_relative_norm_is_exact() {
        let m = generate_disk_mesh(0.1).unwrap();
        let h = NodalField::from_fn(&m, |p| 1.0 + p[0] * p[0]);
        assert_eq!(add_noise(&h, &NoiseSpec::none()).unwrap(), h);
        for delta_e in [0.01, 0.05] {
            let noisy = add_noise(&h, &NoiseSpec { delta_e, seed: 9 }).unwrap();
            let num: f64 = noisy.iter().zip(h.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((num / den - delta_e).abs() < 1e-14);
        }
    }

    #[test]
    fn noise_is_seeded() {
        let m = generate_disk_mesh(0.1).unwrap();
        let h = NodalField::constant(&m, 2.0);
        let spec = NoiseSpec { delta_e: 0.01, seed: 1 };
        let a = add_noise(&h, &spec).unwrap();
        assert_eq!(a, add_noise(&h, &spec).unwrap());
        let b = add_noise(&h, &NoiseSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a, b);
        assert!(add_noise(&NodalField::zeros(&m), &spec).is_err());
    }

    #[test]
    fn masks() {
        let h = 0.05;
        let m = generate_disk_mesh(h).unwrap();
        let total = m.area();
        let masked = |k: MaskKind| -> f64 {
            make_mask(k, &m).iter().zip(m.areas()).map(|(a, b)| a * b).sum()
        };
        assert!(make_mask(MaskKind::Full, &m).iter().all(|&v| v == 1.0));
        assert!((masked(MaskKind::InnerDisk { radius: 0.6 }) / total - 0.36).abs() <= 4.0 * h);
        assert!((masked(MaskKind::HalfDisk) / total - 0.5).abs() <= 4.0 * h);
    }

    #[test]
    fn simulation_on_identical_meshes() {
        let m = generate_disk_mesh(0.1).unwrap();
        let ph = make_phantom(PhantomKind::Shapes, &m);
        let mask = make_mask(MaskKind::Full, &m);
        let sim = simulate_datasets(
            &m,
            &m,
            &ph,
            &BoundaryFlux::ALL,
            &NoiseSpec::none(),
            NoiseStage::Simulation,
            &mask,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(sim.datasets.len(), 4);
        for (d, f) in sim.datasets.iter().zip(BoundaryFlux::ALL) {
            assert_eq!(d.flux, f);
            let fs = crate::forward::solve_forward(&m, &ph.sigma, |p| f.eval(p), &Default::default()).unwrap();
            assert_eq!(d.z, fs.h);
        }
    }

    #[test]
    fn constant_phantom_data_is_near_one() {
        let (hf, hc) = (0.05, 0.1);
        let fine = generate_disk_mesh(hf).unwrap();
        let coarse = generate_disk_mesh(hc).unwrap();
        let ph = make_phantom(PhantomKind::Constant, &coarse);
        let sim = simulate_datasets(
            &fine,
            &coarse,
            &ph,
            &[BoundaryFlux::X1],
            &NoiseSpec::none(),
            NoiseStage::Simulation,
            &make_mask(MaskKind::Full, &coarse),
            &Default::default(),
        )
        .unwrap();
        let err = sim.datasets[0].z.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(err <= 5.0 * hf + 5.0 * hc, "{err}");
    }

    #[test]
    fn swapped_mesh_roles() {
        let fine = generate_disk_mesh(0.05).unwrap();
        let coarse = generate_disk_mesh(0.1).unwrap();
        let ph = make_phantom(PhantomKind::Constant, &coarse);
        let sim = simulate_datasets(
            &coarse,
            &fine,
            &ph,
            &[BoundaryFlux::X2],
            &NoiseSpec::none(),
            NoiseStage::Simulation,
            &make_mask(MaskKind::Full, &fine),
            &Default::default(),
        )
        .unwrap();
        let direct = interpolate_p1(&coarse, &sim.fine_data[0], &fine).unwrap();
        assert_eq!(sim.datasets[0].z, direct);
    }
}
