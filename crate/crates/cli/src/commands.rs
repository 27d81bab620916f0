use std::fs;
use std::path::Path;

use aet_core::forward::ForwardOptions;
use aet_core::io::{export_history, export_vtk, read_field, write_field};
use aet_core::mesh::{generate_disk_mesh, interpolate_p1, read_msh, write_msh};
use aet_core::metrics::error_metrics;
use aet_core::phantom::{make_mask, make_phantom, simulate_datasets, BoundaryFlux};
use aet_core::recon::{reconstruct as run_reconstruction, Dataset};
use aet_core::{AetError, Mesh, NodalField};
use serde::Serialize;

use crate::config::{load_table, Experiment, ExperimentConfig};
use crate::{CliError, EvaluateArgs, ExperimentArgs};

const FINE_MESH: &str = "fine.msh";
const RECON_MESH: &str = "recon.msh";
const TRUTH_RECON: &str = "truth_recon.aetfield";

fn data_file(f: BoundaryFlux) -> String {
    format!("z_f{}.aetfield", f.index())
}

fn experiment(args: &ExperimentArgs) -> Result<Experiment, CliError> {
    let mut table = load_table(args.config.as_deref(), &args.overrides)?;
    if let Some(out) = &args.out {
        table.insert("output_dir".into(), toml::Value::String(out.display().to_string()));
    }
    if let Some(t) = args.threads {
        let recon = table
            .entry("recon")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Usage("recon is not a table".into()))?;
        recon.insert("threads".into(), toml::Value::Integer(t as i64));
    }
    ExperimentConfig::from_table(table)?.validate()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    threads: usize,
    fine_mesh: Option<String>,
    recon_mesh: String,
    outputs: Vec<String>,
    summary: toml::Table,
    config: &'a ExperimentConfig,
}

fn write_manifest(dir: &Path, name: &str, m: &Manifest) -> Result<(), CliError> {
    let text = toml::to_string(m).map_err(|e| CliError::Runtime(format!("cannot render manifest: {e}")))?;
    write_text(&dir.join(name), &text)
}

pub fn mesh(h: f64, out: &Path, vtk: Option<&Path>) -> Result<(), CliError> {
    if !(h > 0.0 && h < 1.0) {
        return Err(CliError::Usage(format!("--h {h} must lie in (0, 1)")));
    }
    let m = generate_disk_mesh(h)?;
    write_msh(&m, out)?;
    if let Some(v) = vtk {
        export_vtk(&m, &[], v)?;
    }
    println!("nodes: {}", m.num_nodes());
    println!("triangles: {}", m.num_triangles());
    println!("max edge: {:.6}", m.h());
    Ok(())
}

pub fn simulate(args: &ExperimentArgs) -> Result<(), CliError> {
    let exp = experiment(args)?;
    let fine = exp.fine_mesh.load()?;
    let coarse = exp.recon_mesh.load()?;
    let phantom = make_phantom(exp.phantom, &fine);
    let mask = make_mask(exp.mask, &coarse);
    let opts = ForwardOptions {
        solver: exp.recon.solver.clone(),
        ..Default::default()
    };
    let sim = simulate_datasets(&fine, &coarse, &phantom, &exp.fluxes, &exp.noise, exp.stage, &mask, &opts)?;
    let truth = interpolate_p1(&fine, &phantom.sigma, &coarse)?;

    let dir = &exp.output_dir;
    create_dir(dir)?;
    let mut outputs = vec![FINE_MESH.to_string(), RECON_MESH.to_string()];
    write_msh(&fine, dir.join(FINE_MESH))?;
    write_msh(&coarse, dir.join(RECON_MESH))?;
    write_field(&phantom.sigma, dir.join("truth_fine.aetfield"))?;
    write_field(&truth, dir.join(TRUTH_RECON))?;
    outputs.extend(["truth_fine.aetfield".to_string(), TRUTH_RECON.to_string()]);

    let names: Vec<String> = exp.fluxes.iter().map(|f| format!("H_f{}", f.index())).collect();
    for (h, name) in sim.fine_data.iter().zip(&names) {
        let file = format!("{name}_fine.aetfield");
        write_field(h, dir.join(&file))?;
        outputs.push(file);
    }
    for d in &sim.datasets {
        write_field(&d.z, dir.join(data_file(d.flux)))?;
        outputs.push(data_file(d.flux));
    }
    let mut fine_fields: Vec<(&str, &NodalField)> = vec![("sigma", &phantom.sigma)];
    fine_fields.extend(names.iter().map(String::as_str).zip(&sim.fine_data));
    export_vtk(&fine, &fine_fields, dir.join("fine.vtk"))?;
    let z_names: Vec<String> = sim.datasets.iter().map(|d| format!("z_f{}", d.flux.index())).collect();
    let mut coarse_fields: Vec<(&str, &NodalField)> = vec![("sigma", &truth)];
    coarse_fields.extend(z_names.iter().map(String::as_str).zip(sim.datasets.iter().map(|d| &d.z)));
    export_vtk(&coarse, &coarse_fields, dir.join("recon.vtk"))?;
    outputs.extend(["fine.vtk".to_string(), "recon.vtk".to_string()]);

    let mut summary = toml::Table::new();
    summary.insert("fine_nodes".into(), (fine.num_nodes() as i64).into());
    summary.insert("recon_nodes".into(), (coarse.num_nodes() as i64).into());
    summary.insert("datasets".into(), (sim.datasets.len() as i64).into());
    write_manifest(
        dir,
        "manifest_simulate.toml",
        &Manifest {
            command: "simulate",
            version: env!("CARGO_PKG_VERSION"),
            seed: exp.noise.seed,
            threads: exp.recon.threads,
            fine_mesh: Some(format!("{:016x}", fine.id())),
            recon_mesh: format!("{:016x}", coarse.id()),
            outputs,
            summary,
            config: &exp.raw,
        },
    )?;
    println!(
        "simulated {} datasets: fine mesh {} nodes, reconstruction mesh {} nodes -> {}",
        sim.datasets.len(),
        fine.num_nodes(),
        coarse.num_nodes(),
        dir.display()
    );
    Ok(())
}

fn read_input_field(mesh: &Mesh, path: &Path) -> Result<NodalField, CliError> {
    if !path.is_file() {
        return Err(CliError::Runtime(format!("missing data file {}", path.display())));
    }
    Ok(read_field(mesh, path)?)
}

pub fn reconstruct(args: &ExperimentArgs) -> Result<(), CliError> {
    let exp = experiment(args)?;
    let mesh_path = match &exp.raw.mesh.recon_path {
        Some(p) => p.clone(),
        None => exp.data_dir.join(RECON_MESH),
    };
    if !mesh_path.is_file() {
        return Err(CliError::Runtime(format!(
            "missing reconstruction mesh {} (run `aet simulate` first)",
            mesh_path.display()
        )));
    }
    let mesh = read_msh(&mesh_path)?;
    let mask = make_mask(exp.mask, &mesh);
    let datasets = exp
        .fluxes
        .iter()
        .map(|&f| {
            let z = read_input_field(&mesh, &exp.data_dir.join(data_file(f)))?;
            Ok(Dataset::new(f, z, mask.clone())?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let truth_path = exp.data_dir.join(TRUTH_RECON);
    let truth = if truth_path.is_file() {
        Some(read_field(&mesh, &truth_path)?)
    } else {
        None
    };
    let sigma0 = NodalField::constant(&mesh, exp.sigma0);
    let (sigma, history) = run_reconstruction(&mesh, &datasets, &sigma0, &exp.recon, truth.as_ref())?;

    let dir = &exp.output_dir;
    create_dir(dir)?;
    write_field(&sigma, dir.join("sigma.aetfield"))?;
    let mut fields: Vec<(&str, &NodalField)> = vec![("sigma", &sigma)];
    if let Some(t) = &truth {
        fields.push(("truth", t));
    }
    export_vtk(&mesh, &fields, dir.join("sigma.vtk"))?;
    export_history(&history, dir.join("history.csv"))?;

    let last = history.final_record();
    let mut summary = toml::Table::new();
    summary.insert("iterations".into(), (history.records.len() as i64).into());
    summary.insert("j_beta_initial".into(), history.initial.j_beta.into());
    summary.insert("j_beta_final".into(), last.j_beta.into());
    if truth.is_some() {
        summary.insert("e_l1_initial".into(), history.initial.e_l1.into());
        summary.insert("e_l1_final".into(), last.e_l1.into());
    }
    write_manifest(
        dir,
        "manifest.toml",
        &Manifest {
            command: "reconstruct",
            version: env!("CARGO_PKG_VERSION"),
            seed: exp.noise.seed,
            threads: exp.recon.threads,
            fine_mesh: None,
            recon_mesh: format!("{:016x}", mesh.id()),
            outputs: ["sigma.aetfield", "sigma.vtk", "history.csv"].map(String::from).to_vec(),
            summary,
            config: &exp.raw,
        },
    )?;
    println!(
        "{} iterations: J_beta {:.6e} -> {:.6e}",
        history.records.len(),
        history.initial.j_beta,
        last.j_beta
    );
    if truth.is_some() {
        println!("e_L1 {:.6e} -> {:.6e}", history.initial.e_l1, last.e_l1);
    }
    println!("results in {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct Metrics {
    e_l1: f64,
    e_tv: f64,
    e_dbv: f64,
    evaluated_on: String,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let mesh = read_msh(&args.mesh)?;
    let sigma = read_field(&mesh, &args.sigma)?;
    let truth_mesh = args.truth_mesh.as_deref().map(read_msh).transpose()?;
    let (eval_mesh, sigma, truth): (Mesh, NodalField, NodalField) = match read_field(&mesh, &args.truth) {
        Ok(t) => (mesh, sigma, t),
        Err(AetError::MeshMismatch { .. }) => {
            if !args.interpolate {
                return Err(CliError::Usage(
                    "truth belongs to a different mesh; pass --truth-mesh and --interpolate".into(),
                ));
            }
            let tm = truth_mesh.ok_or_else(|| CliError::Usage("--interpolate needs --truth-mesh".into()))?;
            let truth = read_field(&tm, &args.truth)?;
            let moved = interpolate_p1(&mesh, &sigma, &tm)?;
            (tm, moved, truth)
        }
        Err(e) => return Err(e.into()),
    };
    let e = error_metrics(&eval_mesh, &sigma, &truth)?;
    println!("e_L1 = {:.10e}", e.e_l1);
    println!("e_TV = {:.10e}", e.e_tv);
    println!("e_dBV = {:.10e}", e.e_dbv);
    if let Some(out) = &args.out {
        let m = Metrics {
            e_l1: e.e_l1,
            e_tv: e.e_tv,
            e_dbv: e.e_dbv,
            evaluated_on: format!("{:016x}", eval_mesh.id()),
        };
        let text = toml::to_string(&m).map_err(|e| CliError::Runtime(format!("cannot render metrics: {e}")))?;
        write_text(out, &text)?;
    }
    Ok(())
}
