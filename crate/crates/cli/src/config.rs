//! Experiment configuration: a TOML file with one table per stage, merged
//! with `--set section.key=value` overrides and validated before any file
//! is written.

use std::path::{Path, PathBuf};

use aet_core::fem::NeumannOptions;
use aet_core::mesh::{generate_disk_mesh, read_msh};
use aet_core::phantom::{BoundaryFlux, MaskKind, NoiseSpec, NoiseStage, PhantomKind};
use aet_core::recon::ReconConfig;
use aet_core::Mesh;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub mesh: MeshSection,
    pub phantom: PhantomSection,
    pub data: DataSection,
    pub noise: NoiseSection,
    pub mask: MaskSection,
    pub recon: ReconSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            mesh: MeshSection::default(),
            phantom: PhantomSection::default(),
            data: DataSection::default(),
            noise: NoiseSection::default(),
            mask: MaskSection::default(),
            recon: ReconSection::default(),
        }
    }
}

/// Each mesh is either generated (`*_h`) or read from a `.msh` file
/// (`*_path`), never both.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub fine_h: Option<f64>,
    pub fine_path: Option<PathBuf>,
    pub recon_h: Option<f64>,
    pub recon_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub name: String,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self { name: "shapes".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Flux indices 1..=4.
    pub fluxes: Vec<usize>,
    /// Where `reconstruct` reads simulated data; defaults to `output_dir`.
    pub dir: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            fluxes: vec![1, 2, 3],
            dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub delta_e: f64,
    pub seed: u64,
    /// "simulation" (fine mesh) or "reconstruction" (after transfer).
    pub stage: String,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            delta_e: 0.01,
            seed: 1,
            stage: "simulation".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSection {
    /// "full", "inner_disk" or "half_disk".
    pub kind: String,
    pub radius: f64,
}

impl Default for MaskSection {
    fn default() -> Self {
        Self {
            kind: "full".into(),
            radius: 0.6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconSection {
    pub beta: f64,
    pub eps: f64,
    pub box_low: f64,
    pub box_high: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub delta: Option<f64>,
    pub warm_start_factor: f64,
    pub stop_tol_outer: f64,
    pub stop_tol_inner: f64,
    pub solver_tol: f64,
    pub solver_maxit: Option<usize>,
    pub jacobi: bool,
    pub threads: usize,
    pub record_time: bool,
    /// Constant initial guess σ₀.
    pub sigma0: f64,
}

impl Default for ReconSection {
    fn default() -> Self {
        let r = ReconConfig::default();
        Self {
            beta: r.beta,
            eps: r.eps,
            box_low: r.box_low,
            box_high: r.box_high,
            outer_iters: r.outer_iters,
            inner_iters: r.inner_iters,
            cg_iters: r.cg_iters,
            cg_tol: r.cg_tol,
            delta: r.delta,
            warm_start_factor: r.warm_start_factor,
            stop_tol_outer: r.stop_tol_outer,
            stop_tol_inner: r.stop_tol_inner,
            solver_tol: r.solver.tol,
            solver_maxit: r.solver.maxit,
            jacobi: r.solver.jacobi,
            threads: r.threads,
            record_time: r.record_time,
            sigma0: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum MeshSource {
    Generate(f64),
    File(PathBuf),
}

impl MeshSource {
    pub fn load(&self) -> Result<Mesh, CliError> {
        match self {
            MeshSource::Generate(h) => Ok(generate_disk_mesh(*h)?),
            MeshSource::File(p) => Ok(read_msh(p)?),
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub raw: ExperimentConfig,
    pub output_dir: PathBuf,
    pub data_dir: PathBuf,
    pub fine_mesh: MeshSource,
    pub recon_mesh: MeshSource,
    pub phantom: PhantomKind,
    pub fluxes: Vec<BoundaryFlux>,
    pub noise: NoiseSpec,
    pub stage: NoiseStage,
    pub mask: MaskKind,
    pub recon: ReconConfig,
    pub sigma0: f64,
}

/// Reads the config file (if any) and applies `key=value` overrides.
pub fn load_table(path: Option<&Path>, overrides: &[String]) -> Result<toml::Table, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    Ok(table)
}

/// Sets a dotted key. The value is parsed as a TOML value and falls back
/// to a plain string, so `phantom.name=head` works without quotes.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("invalid key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("{p:?} in {key:?} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn mesh_source(h: Option<f64>, path: &Option<PathBuf>, default_h: f64, name: &str) -> Result<MeshSource, CliError> {
    match (h, path) {
        (Some(_), Some(_)) => Err(CliError::Usage(format!("mesh.{name}_h and mesh.{name}_path are exclusive"))),
        (_, Some(p)) => {
            if p.is_file() {
                Ok(MeshSource::File(p.clone()))
            } else {
                Err(CliError::Usage(format!("mesh.{name}_path {} does not exist", p.display())))
            }
        }
        (h, None) => {
            let h = h.unwrap_or(default_h);
            if h > 0.0 && h < 1.0 {
                Ok(MeshSource::Generate(h))
            } else {
                Err(CliError::Usage(format!("mesh.{name}_h = {h} must lie in (0, 1)")))
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_table(table: toml::Table) -> Result<Self, CliError> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid config: {}", e.message())))
    }

    pub fn validate(self) -> Result<Experiment, CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        let fine_mesh = mesh_source(self.mesh.fine_h, &self.mesh.fine_path, 0.05, "fine")?;
        let recon_mesh = mesh_source(self.mesh.recon_h, &self.mesh.recon_path, 0.1, "recon")?;
        let phantom: PhantomKind = self
            .phantom
            .name
            .parse()
            .map_err(|e| CliError::Usage(format!("phantom.name: {e}")))?;
        if self.data.fluxes.is_empty() {
            return usage("data.fluxes must list at least one flux".into());
        }
        let mut fluxes = Vec::new();
        for &i in &self.data.fluxes {
            let f = BoundaryFlux::from_index(i).map_err(|e| CliError::Usage(format!("data.fluxes: {e}")))?;
            if fluxes.contains(&f) {
                return usage(format!("data.fluxes lists flux {i} twice"));
            }
            fluxes.push(f);
        }
        if !(self.noise.delta_e >= 0.0 && self.noise.delta_e.is_finite()) {
            return usage(format!("noise.delta_e = {} must be nonnegative", self.noise.delta_e));
        }
        let stage = match self.noise.stage.as_str() {
            "simulation" => NoiseStage::Simulation,
            "reconstruction" => NoiseStage::Reconstruction,
            s => return usage(format!("noise.stage {s:?} is not \"simulation\" or \"reconstruction\"")),
        };
        let mask = match self.mask.kind.as_str() {
            "full" => MaskKind::Full,
            "half_disk" => MaskKind::HalfDisk,
            "inner_disk" => {
                if !(self.mask.radius > 0.0) {
                    return usage(format!("mask.radius = {} must be positive", self.mask.radius));
                }
                MaskKind::InnerDisk {
                    radius: self.mask.radius,
                }
            }
            k => return usage(format!("mask.kind {k:?} is not full, inner_disk or half_disk")),
        };
        let r = &self.recon;
        let recon = ReconConfig {
            beta: r.beta,
            eps: r.eps,
            box_low: r.box_low,
            box_high: r.box_high,
            outer_iters: r.outer_iters,
            inner_iters: r.inner_iters,
            cg_iters: r.cg_iters,
            cg_tol: r.cg_tol,
            delta: r.delta,
            warm_start_factor: r.warm_start_factor,
            stop_tol_outer: r.stop_tol_outer,
            stop_tol_inner: r.stop_tol_inner,
            solver: NeumannOptions {
                tol: r.solver_tol,
                maxit: r.solver_maxit,
                jacobi: r.jacobi,
            },
            seed: self.noise.seed,
            threads: r.threads,
            record_time: r.record_time,
        };
        recon.validate().map_err(|e| CliError::Usage(format!("recon: {e}")))?;
        if !(r.solver_tol > 0.0) {
            return usage(format!("recon.solver_tol = {} must be positive", r.solver_tol));
        }
        if !(r.sigma0 >= r.box_low && r.sigma0 <= r.box_high) {
            return usage(format!(
                "recon.sigma0 = {} lies outside [{}, {}]",
                r.sigma0, r.box_low, r.box_high
            ));
        }
        let output_dir = self.output_dir.clone();
        let data_dir = self.data.dir.clone().unwrap_or_else(|| output_dir.clone());
        let noise = NoiseSpec {
            delta_e: self.noise.delta_e,
            seed: self.noise.seed,
        };
        Ok(Experiment {
            sigma0: r.sigma0,
            output_dir,
            data_dir,
            fine_mesh,
            recon_mesh,
            phantom,
            fluxes,
            noise,
            stage,
            mask,
            recon,
            raw: self,
        })
    }
}
