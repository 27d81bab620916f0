//! Total-variation regularized L¹ fitting of power-density data.
//!
//! Each outer iteration linearizes `H` around the current conductivity σ
//! and computes an increment κ by iterative reweighting: the weights
//!
//! ```text
//! w  = 1 / |H'(σ)κ' − d|_ε          (nodal, per dataset)
//! w₀ = 1 / |∇(σ + κ')|_ε            (per triangle)
//! ```
//!
//! are frozen at the previous increment κ' and the weighted quadratic
//! `½‖H'(σ)κ − d‖²_w + β/2 ‖∇(σ+κ)‖²_{w₀}` is minimized by a few CG steps on
//! its normal equations
//!
//! ```text
//! (Σ_j J_jᵀ W_j J_j + β K_{w₀} + δ I) κ = Σ_j J_jᵀ W_j d_j − β K_{w₀} σ,
//! ```
//!
//! where `J_j` is the discrete derivative for flux `j`, `W_j` the masked
//! lumped mass times `w_j`, and `d_j = z_j − H_j(σ)`. `J_j` is only applied
//! to vectors, one sensitivity solve per product and one adjoint solve per
//! transpose product. After the inner loop σ ← clip(σ + κ', box).

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{AetError, Result};
use crate::fem::{cg_solve, stiffness_unchecked, CgOptions, CgReport, NeumannOptions, SparseMatrix};
use crate::field::{ElementField, NodalField};
use crate::forward::{
    apply_derivative, apply_derivative_transpose, ForwardOperator, ForwardOptions, ForwardSolution,
};
use crate::mesh::Mesh;
use crate::metrics::error_metrics;
use crate::phantom::BoundaryFlux;
use crate::quadrature::{l1_norm, smoothed_l1_norm};

/// One boundary flux with its measured power density on the
/// reconstruction mesh and the element mask where data is available.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub flux: BoundaryFlux,
    pub z: NodalField,
    pub mask: ElementField,
}

impl Dataset {
    pub fn new(flux: BoundaryFlux, z: NodalField, mask: ElementField) -> Result<Self> {
        if let Some(t) = mask.iter().position(|&m| m != 0.0 && m != 1.0) {
            return Err(AetError::Domain(format!("mask value {} at triangle {t} is not 0 or 1", mask[t])));
        }
        Ok(Self { flux, z, mask })
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        self.z.check_mesh(mesh)?;
        if self.mask.len() != mesh.num_triangles() {
            return Err(AetError::Dimension {
                expected: mesh.num_triangles(),
                found: self.mask.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReconConfig {
    pub beta: f64,
    pub eps: f64,
    pub box_low: f64,
    pub box_high: f64,
    /// Outer (linearization) iterations K.
    pub outer_iters: usize,
    /// Reweighting passes I per outer iteration.
    pub inner_iters: usize,
    /// CG iterations per reweighting pass.
    pub cg_iters: usize,
    /// Relative residual at which the inner CG stops early.
    pub cg_tol: f64,
    /// Stabilization δ; `None` picks `1e-10 ×` the operator's diagonal scale.
    pub delta: Option<f64>,
    /// The inner CG starts from `warm_start_factor · κ'`.
    pub warm_start_factor: f64,
    pub stop_tol_outer: f64,
    pub stop_tol_inner: f64,
    /// PDE solver settings for forward, sensitivity and adjoint solves.
    pub solver: NeumannOptions,
    pub seed: u64,
    /// Worker threads for per-dataset solves; 1 is fully sequential.
    pub threads: usize,
    /// Record wall-clock seconds in the history (zero otherwise).
    pub record_time: bool,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            beta: 3.5e-2,
            eps: 1e-4,
            box_low: 0.2,
            box_high: 1.5,
            outer_iters: 50,
            inner_iters: 3,
            cg_iters: 3,
            cg_tol: 1e-10,
            delta: None,
            warm_start_factor: 1.0,
            stop_tol_outer: 1e-4,
            stop_tol_inner: 1e-3,
            solver: NeumannOptions::default(),
            seed: 0,
            threads: 1,
            record_time: true,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(AetError::Domain(m));
        if !(self.beta > 0.0) {
            return fail(format!("beta = {} must be positive", self.beta));
        }
        if !(self.eps > 0.0) {
            return fail(format!("eps = {} must be positive", self.eps));
        }
        if !(self.box_low > 0.0 && self.box_low <= self.box_high) {
            return fail(format!("box [{}, {}] is invalid", self.box_low, self.box_high));
        }
        if self.outer_iters == 0 || self.inner_iters == 0 || self.cg_iters == 0 {
            return fail("iteration counts must be at least 1".into());
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) {
                return fail(format!("delta = {d} must be nonnegative"));
            }
        }
        if self.threads == 0 {
            return fail("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn forward_options(&self) -> ForwardOptions {
        ForwardOptions {
            solver: self.solver.clone(),
            box_low: self.box_low,
            box_high: self.box_high,
        }
    }
}

/// Exact total variation of a P1 field, `Σ_T |T| |∇σ_T|`.
pub fn tv_seminorm(mesh: &Mesh, sigma: &[f64]) -> f64 {
    mesh.gradients(sigma)
        .iter()
        .zip(mesh.areas())
        .map(|(g, a)| a * g[0].hypot(g[1]))
        .sum()
}

/// `Σ_T |T| √(|∇σ_T|² + ε²)`.
pub fn tv_smoothed(mesh: &Mesh, sigma: &[f64], eps: f64) -> f64 {
    mesh.gradients(sigma)
        .iter()
        .zip(mesh.areas())
        .map(|(g, a)| a * (g[0] * g[0] + g[1] * g[1] + eps * eps).sqrt())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    /// `Σ_j ∫ mask_j |H_j(σ) − z_j|`.
    pub fit: f64,
    /// Total variation (smoothed when evaluated with ε).
    pub tv: f64,
    /// `fit + β tv`.
    pub total: f64,
}

/// `J_β(σ) = Σ_j ‖H_j(σ) − z_j‖_{L¹(mask_j)} + β |σ|_TV`.
pub fn objective(
    mesh: &Mesh,
    sigma: &NodalField,
    datasets: &[Dataset],
    beta: f64,
    opts: &ForwardOptions,
) -> Result<ObjectiveParts> {
    let fs = solve_all(mesh, sigma, datasets, opts, 1)?;
    Ok(objective_from(mesh, sigma, datasets, &fs, beta, None))
}

/// The ε-smoothed objective, with `|·|_ε` in both the fit and the TV term.
pub fn objective_smoothed(
    mesh: &Mesh,
    sigma: &NodalField,
    datasets: &[Dataset],
    beta: f64,
    eps: f64,
    opts: &ForwardOptions,
) -> Result<ObjectiveParts> {
    let fs = solve_all(mesh, sigma, datasets, opts, 1)?;
    Ok(objective_from(mesh, sigma, datasets, &fs, beta, Some(eps)))
}

fn objective_from(
    mesh: &Mesh,
    sigma: &[f64],
    datasets: &[Dataset],
    fs: &[ForwardSolution],
    beta: f64,
    eps: Option<f64>,
) -> ObjectiveParts {
    let fit = datasets
        .iter()
        .zip(fs)
        .map(|(d, f)| {
            let r: Vec<f64> = f.h.iter().zip(d.z.iter()).map(|(h, z)| h - z).collect();
            match eps {
                Some(e) => smoothed_l1_norm(mesh, &r, Some(&d.mask), e),
                None => l1_norm(mesh, &r, Some(&d.mask)),
            }
        })
        .sum();
    let tv = match eps {
        Some(e) => tv_smoothed(mesh, sigma, e),
        None => tv_seminorm(mesh, sigma),
    };
    ObjectiveParts {
        fit,
        tv,
        total: fit + beta * tv,
    }
}

fn solve_all(
    mesh: &Mesh,
    sigma: &NodalField,
    datasets: &[Dataset],
    opts: &ForwardOptions,
    threads: usize,
) -> Result<Vec<ForwardSolution>> {
    for d in datasets {
        d.check(mesh)?;
    }
    let op = Arc::new(ForwardOperator::new(mesh, sigma, opts)?);
    map_datasets(threads, datasets, |j, d| {
        op.solve_flux(mesh, |p| d.flux.eval(p)).map_err(|e| AetError::Dataset {
            index: j,
            source: Box::new(e),
        })
    })
}

/// Maps over datasets in order, on a dedicated pool when `threads > 1`.
fn map_datasets<T, U, F>(threads: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> Result<U> + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(j, x)| f(j, x)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AetError::Domain(format!("cannot start thread pool: {e}")))?;
    pool.install(|| items.par_iter().enumerate().map(|(j, x)| f(j, x)).collect())
}

/// IRLS weights `w = 1/|residual|_ε` (nodal) and `w₀ = 1/|∇(σ+κ')|_ε`
/// (per triangle, from the given gradient magnitudes).
pub fn compute_weights(residual: &NodalField, grad_norm: &ElementField, eps: f64) -> (NodalField, ElementField) {
    let w = residual.map(|r| 1.0 / r.hypot(eps));
    let w0 = ElementField::from_raw(grad_norm.iter().map(|g| 1.0 / g.hypot(eps)).collect());
    (w, w0)
}

/// Masked lumped mass `Σ_{T∋i} mask_T |T| / 3`.
pub fn masked_lumped_mass(mesh: &Mesh, mask: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mask[t] * mesh.areas()[t] / 3.0;
        for &v in tri {
            m[v] += a;
        }
    }
    m
}

/// The matrix-free normal operator `Σ_j J_jᵀ W_j J_j + β K_{w₀} + δ I`.
pub struct NormalOperator<'a> {
    mesh: &'a Mesh,
    fs: &'a [ForwardSolution],
    /// Diagonal of `W_j`: masked lumped mass times `w_j`.
    data_weights: Vec<Vec<f64>>,
    k_w0: SparseMatrix,
    beta: f64,
    delta: f64,
    threads: usize,
}

impl<'a> NormalOperator<'a> {
    pub fn new(
        mesh: &'a Mesh,
        fs: &'a [ForwardSolution],
        weights: &[NodalField],
        masks: &[&ElementField],
        w0: &ElementField,
        beta: f64,
        delta: f64,
    ) -> Self {
        let data_weights = weights
            .iter()
            .zip(masks)
            .map(|(w, mask)| {
                masked_lumped_mass(mesh, mask)
                    .iter()
                    .zip(w.iter())
                    .map(|(m, w)| m * w)
                    .collect()
            })
            .collect();
        Self {
            mesh,
            fs,
            data_weights,
            k_w0: stiffness_unchecked(mesh, w0),
            beta,
            delta,
            threads: 1,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn set_delta(&mut self, delta: f64) {
        self.delta = delta;
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tv_matrix(&self) -> &SparseMatrix {
        &self.k_w0
    }

    /// Scale of the operator's diagonal: mean diagonal of `β K_{w₀}` plus
    /// the mean local data term `Σ_j W_j r_j²`.
    pub fn diagonal_scale(&self) -> f64 {
        let n = self.mesh.num_nodes() as f64;
        let tv = self.beta * self.k_w0.diagonal().iter().sum::<f64>() / n;
        let data: f64 = self
            .fs
            .iter()
            .zip(&self.data_weights)
            .map(|(f, w)| {
                f.grad_sq_recovered
                    .iter()
                    .zip(w)
                    .map(|(r, w)| w * r * r)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n;
        tv + data
    }

    pub fn apply(&self, kappa: &[f64], out: &mut [f64]) -> Result<()> {
        self.k_w0.mul_vec(kappa, out);
        for (o, k) in out.iter_mut().zip(kappa) {
            *o = self.beta * *o + self.delta * k;
        }
        let parts = map_datasets(self.threads, self.fs, |j, fs| {
            let wrap = |e| AetError::Dataset {
                index: j,
                source: Box::new(e),
            };
            let mut y = apply_derivative(self.mesh, fs, kappa).map_err(wrap)?;
            y.iter_mut().zip(&self.data_weights[j]).for_each(|(v, w)| *v *= w);
            apply_derivative_transpose(self.mesh, fs, &y).map_err(wrap)
        })?;
        for p in parts {
            out.iter_mut().zip(&p).for_each(|(o, v)| *o += v);
        }
        Ok(())
    }

    /// `Σ_j J_jᵀ W_j d_j − β K_{w₀} σ`.
    pub fn rhs(&self, data: &[Vec<f64>], sigma: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.k_w0.apply(sigma);
        out.iter_mut().for_each(|v| *v *= -self.beta);
        let parts = map_datasets(self.threads, self.fs, |j, fs| {
            let y: Vec<f64> = data[j].iter().zip(&self.data_weights[j]).map(|(d, w)| d * w).collect();
            apply_derivative_transpose(self.mesh, fs, &y).map_err(|e| AetError::Dataset {
                index: j,
                source: Box::new(e),
            })
        })?;
        for p in parts {
            out.iter_mut().zip(&p).for_each(|(o, v)| *o += v);
        }
        Ok(out)
    }
}

/// Applies the normal operator once: `Σ_j J_jᵀ(mask_j M w_j J_j κ) + β K_{w₀} κ + δ κ`.
#[allow(clippy::too_many_arguments)]
pub fn apply_normal_operator(
    mesh: &Mesh,
    fs_list: &[ForwardSolution],
    kappa: &NodalField,
    w_list: &[NodalField],
    w0: &ElementField,
    beta: f64,
    delta: f64,
    masks: &[&ElementField],
) -> Result<Vec<f64>> {
    kappa.check_mesh(mesh)?;
    let op = NormalOperator::new(mesh, fs_list, w_list, masks, w0, beta, delta);
    let mut out = vec![0.0; mesh.num_nodes()];
    op.apply(kappa, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LinearizedStep {
    pub kappa: NodalField,
    pub report: CgReport,
    pub delta: f64,
}

/// One reweighting pass: weights from `kappa_prev`, then CG on the normal
/// equations from `warm_start_factor · kappa_prev`.
pub fn solve_linearized_step(
    mesh: &Mesh,
    fs_list: &[ForwardSolution],
    datasets: &[Dataset],
    sigma: &NodalField,
    kappa_prev: &NodalField,
    config: &ReconConfig,
) -> Result<LinearizedStep> {
    // d_j = z_j − H_j(σ)
    let d_list: Vec<Vec<f64>> = datasets
        .iter()
        .zip(fs_list)
        .map(|(d, f)| d.z.iter().zip(f.h.iter()).map(|(z, h)| z - h).collect())
        .collect();
    let weights: Vec<NodalField> = map_datasets(config.threads, fs_list, |j, fs| {
        let lin = apply_derivative(mesh, fs, kappa_prev).map_err(|e| AetError::Dataset {
            index: j,
            source: Box::new(e),
        })?;
        let res: Vec<f64> = lin.iter().zip(&d_list[j]).map(|(l, d)| l - d).collect();
        Ok(NodalField::from_raw(mesh, res).map(|r| 1.0 / r.hypot(config.eps)))
    })?;
    let shifted: Vec<f64> = sigma.iter().zip(kappa_prev.iter()).map(|(s, k)| s + k).collect();
    let grad_norm = ElementField::from_raw(mesh.gradients(&shifted).iter().map(|g| g[0].hypot(g[1])).collect());
    let w0 = ElementField::from_raw(grad_norm.iter().map(|g| 1.0 / g.hypot(config.eps)).collect());

    let masks: Vec<&ElementField> = datasets.iter().map(|d| &d.mask).collect();
    let mut op = NormalOperator::new(mesh, fs_list, &weights, &masks, &w0, config.beta, 0.0)
        .with_threads(config.threads);
    let delta = config.delta.unwrap_or_else(|| 1e-10 * op.diagonal_scale());
    op.set_delta(delta);

    let rhs = op.rhs(&d_list, sigma)?;
    let x0: Vec<f64> = kappa_prev.iter().map(|k| config.warm_start_factor * k).collect();
    let cg = CgOptions {
        tol: config.cg_tol,
        maxit: config.cg_iters,
        ..Default::default()
    };
    let sol = cg_solve(|x, y| op.apply(x, y), &rhs, Some(&x0), &cg)?;
    Ok(LinearizedStep {
        kappa: NodalField::from_raw(mesh, sol.x),
        report: sol.report,
        delta,
    })
}

/// Per-iteration log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub j_beta: f64,
    pub fit: f64,
    pub tv: f64,
    pub e_l1: f64,
    pub e_tv: f64,
    pub e_dbv: f64,
    /// `‖κ'‖_{L¹}` of the applied increment.
    pub update_norm: f64,
    pub seconds: f64,
    pub inner: Vec<CgReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconHistory {
    /// Values at the initial guess (`k = 0`).
    pub initial: IterationRecord,
    /// One record per executed outer iteration.
    pub records: Vec<IterationRecord>,
}

impl ReconHistory {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().unwrap_or(&self.initial)
    }
}

/// Runs the outer linearization loop from `sigma0`.
///
/// When `truth` is given, the error metrics are logged per iteration;
/// otherwise they are NaN.
pub fn reconstruct(
    mesh: &Mesh,
    datasets: &[Dataset],
    sigma0: &NodalField,
    config: &ReconConfig,
    truth: Option<&NodalField>,
) -> Result<(NodalField, ReconHistory)> {
    config.validate()?;
    if datasets.is_empty() {
        return Err(AetError::Domain("at least one dataset is required".into()));
    }
    sigma0.check_mesh(mesh)?;
    if let Some(t) = truth {
        t.check_mesh(mesh)?;
    }
    let fwd = config.forward_options();
    let start = Instant::now();
    let elapsed = |s: &Instant| if config.record_time { s.elapsed().as_secs_f64() } else { 0.0 };

    let mut sigma = sigma0.clone();
    let mut fs = solve_all(mesh, &sigma, datasets, &fwd, config.threads)
        .map_err(|e| at_iteration(0, e))?;
    let record = |k: usize, sigma: &NodalField, fs: &[ForwardSolution], update: f64, inner: Vec<CgReport>, secs: f64| {
        let parts = objective_from(mesh, sigma, datasets, fs, config.beta, None);
        let errors = truth.map(|t| error_metrics(mesh, sigma, t)).transpose()?;
        Ok::<_, AetError>(IterationRecord {
            k,
            j_beta: parts.total,
            fit: parts.fit,
            tv: parts.tv,
            e_l1: errors.map_or(f64::NAN, |e| e.e_l1),
            e_tv: errors.map_or(f64::NAN, |e| e.e_tv),
            e_dbv: errors.map_or(f64::NAN, |e| e.e_dbv),
            update_norm: update,
            seconds: secs,
            inner,
        })
    };
    let initial = record(0, &sigma, &fs, 0.0, Vec::new(), elapsed(&start))?;
    log::info!("k=0 J={:.6e} fit={:.6e} tv={:.6e}", initial.j_beta, initial.fit, initial.tv);
    let mut history = ReconHistory {
        initial,
        records: Vec::with_capacity(config.outer_iters),
    };

    for k in 1..=config.outer_iters {
        let mut kappa = NodalField::zeros(mesh);
        let mut inner = Vec::with_capacity(config.inner_iters);
        for _ in 0..config.inner_iters {
            let step = solve_linearized_step(mesh, &fs, datasets, &sigma, &kappa, config)
                .map_err(|e| at_iteration(k, e))?;
            inner.push(step.report);
            let change = step
                .kappa
                .iter()
                .zip(kappa.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let size = step.kappa.iter().map(|v| v * v).sum::<f64>().sqrt();
            kappa = step.kappa;
            if size == 0.0 || change < config.stop_tol_inner * size {
                break;
            }
        }

        let update_norm = l1_norm(mesh, &kappa, None);
        let sigma_norm = l1_norm(mesh, &sigma, None);
        sigma
            .iter_mut()
            .zip(kappa.iter())
            .for_each(|(s, d)| *s = (*s + d).clamp(config.box_low, config.box_high));
        fs = solve_all(mesh, &sigma, datasets, &fwd, config.threads).map_err(|e| at_iteration(k, e))?;
        let rec = record(k, &sigma, &fs, update_norm, inner, elapsed(&start))?;
        log::info!(
            "k={k} J={:.6e} fit={:.6e} tv={:.6e} |dk|={:.3e} e_L1={:.4e}",
            rec.j_beta,
            rec.fit,
            rec.tv,
            rec.update_norm,
            rec.e_l1
        );
        history.records.push(rec);
        if update_norm < config.stop_tol_outer * sigma_norm {
            break;
        }
    }
    Ok((sigma, history))
}

fn at_iteration(iteration: usize, e: AetError) -> AetError {
    AetError::Iteration {
        iteration,
        source: Box::new(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk_mesh;
    use crate::phantom::{make_mask, MaskKind};
    use crate::rng::SplitMix64;

    fn square_with_center() -> Mesh {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let tris = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        Mesh::new(nodes, tris).unwrap()
    }

    fn exact_data(mesh: &Mesh, truth: &NodalField, fluxes: &[BoundaryFlux]) -> Vec<Dataset> {
        let fs = solve_all(
            mesh,
            truth,
            &fluxes.iter().map(|&f| dummy(mesh, f)).collect::<Vec<_>>(),
            &ForwardOptions::default(),
            1,
        )
        .unwrap();
        fluxes
            .iter()
            .zip(fs)
            .map(|(&f, s)| Dataset::new(f, s.h, ElementField::constant(mesh, 1.0)).unwrap())
            .collect()
    }

    fn dummy(mesh: &Mesh, f: BoundaryFlux) -> Dataset {
        Dataset::new(f, NodalField::zeros(mesh), ElementField::constant(mesh, 1.0)).unwrap()
    }

    #[test]
    fn tv_of_constant_and_linear() {
        let m = generate_disk_mesh(0.2).unwrap();
        assert!(tv_seminorm(&m, &NodalField::constant(&m, 3.0)) < 1e-12);
        let x = NodalField::from_fn(&m, |p| 2.0 * p[0]);
        assert!((tv_seminorm(&m, &x) - 2.0 * m.area()).abs() < 1e-12);
    }

    #[test]
    fn tv_of_hat() {
        let m = square_with_center();
        let hat = [0.0, 0.0, 0.0, 0.0, 1.0];
        // four triangles of area 1/4 with |∇φ| = 2
        assert!((tv_seminorm(&m, &hat) - 2.0).abs() < 1e-14);
        let eps = 0.5;
        let expected = 4.0 * 0.25 * (4.0f64 + eps * eps).sqrt();
        assert!((tv_smoothed(&m, &hat, eps) - expected).abs() < 1e-14);
    }

    #[test]
    fn smoothed_tv_bounds() {
        let m = generate_disk_mesh(0.2).unwrap();
        let mut rng = SplitMix64::new(3);
        let s: Vec<f64> = (0..m.num_nodes()).map(|_| rng.uniform(0.5, 1.5)).collect();
        for eps in [1e-1, 1e-3] {
            let gap = tv_smoothed(&m, &s, eps) - tv_seminorm(&m, &s);
            assert!(gap >= 0.0 && gap <= eps * m.area() + 1e-14);
        }
    }

    #[test]
    fn weights_examples() {
        let m = square_with_center();
        let r = NodalField::new(&m, vec![0.0, 3.0, -4.0, 1e-8, 1.0]).unwrap();
        let g = ElementField::new(&m, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let (w, w0) = compute_weights(&r, &g, 1e-4);
        assert_eq!(w[0], 1e4);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-8);
        assert!((w[2] - 0.25).abs() < 1e-8);
        assert!(w[3] < 1e4 && w[3] > 0.99e4);
        assert_eq!(w0[0], 1e4);
        assert!((w0[3] - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn dataset_rejects_fractional_mask() {
        let m = square_with_center();
        let mask = ElementField::new(&m, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(Dataset::new(BoundaryFlux::X1, NodalField::zeros(&m), mask).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ReconConfig::default().validate().is_ok());
        let bad = [
            ReconConfig { beta: 0.0, ..Default::default() },
            ReconConfig { eps: -1.0, ..Default::default() },
            ReconConfig { box_low: 2.0, box_high: 1.0, ..Default::default() },
            ReconConfig { cg_iters: 0, ..Default::default() },
            ReconConfig { delta: Some(-1.0), ..Default::default() },
            ReconConfig { threads: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn masked_mass_sums_to_masked_area() {
        let m = generate_disk_mesh(0.1).unwrap();
        let mask = make_mask(MaskKind::HalfDisk, &m);
        let total: f64 = masked_lumped_mass(&m, &mask).iter().sum();
        let area: f64 = m.areas().iter().zip(mask.iter()).map(|(a, k)| a * k).sum();
        assert!((total - area).abs() < 1e-13);
    }

    fn operator_setup(m: &Mesh) -> (Vec<ForwardSolution>, Vec<NodalField>, ElementField, Vec<ElementField>) {
        let sigma = NodalField::from_fn(m, |p| 1.0 + 0.3 * p[0] * p[1]);
        let ds: Vec<Dataset> = [BoundaryFlux::X1, BoundaryFlux::Diagonal].iter().map(|&f| dummy(m, f)).collect();
        let fs = solve_all(m, &sigma, &ds, &ForwardOptions::default(), 1).unwrap();
        let mut rng = SplitMix64::new(11);
        let w = (0..2)
            .map(|_| NodalField::new(m, (0..m.num_nodes()).map(|_| rng.uniform(0.5, 2.0)).collect()).unwrap())
            .collect();
        let w0 = ElementField::new(m, (0..m.num_triangles()).map(|t| 1.0 + (t % 5) as f64).collect()).unwrap();
        let masks = vec![ElementField::constant(m, 1.0), make_mask(MaskKind::HalfDisk, m)];
        (fs, w, w0, masks)
    }

    #[test]
    fn normal_operator_is_symmetric_positive() {
        let m = generate_disk_mesh(0.2).unwrap();
        let (fs, w, w0, masks) = operator_setup(&m);
        let mrefs: Vec<&ElementField> = masks.iter().collect();
        let op = NormalOperator::new(&m, &fs, &w, &mrefs, &w0, 0.1, 1e-6);
        let mut rng = SplitMix64::new(5);
        let n = m.num_nodes();
        for _ in 0..5 {
            let a: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
            let (mut la, mut lb) = (vec![0.0; n], vec![0.0; n]);
            op.apply(&a, &mut la).unwrap();
            op.apply(&b, &mut lb).unwrap();
            let ab: f64 = la.iter().zip(&b).map(|(x, y)| x * y).sum();
            let ba: f64 = lb.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!((ab - ba).abs() <= 1e-8 * ab.abs().max(ba.abs()));
            let aa: f64 = la.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!(aa > 0.0);
        }
    }

    #[test]
    fn threaded_operator_matches_sequential() {
        let m = generate_disk_mesh(0.2).unwrap();
        let (fs, w, w0, masks) = operator_setup(&m);
        let mrefs: Vec<&ElementField> = masks.iter().collect();
        let a: Vec<f64> = m.nodes().iter().map(|p| p[0] - p[1] * p[1]).collect();
        let mut y1 = vec![0.0; a.len()];
        let mut y4 = vec![0.0; a.len()];
        NormalOperator::new(&m, &fs, &w, &mrefs, &w0, 0.1, 0.0).apply(&a, &mut y1).unwrap();
        NormalOperator::new(&m, &fs, &w, &mrefs, &w0, 0.1, 0.0)
            .with_threads(4)
            .apply(&a, &mut y4)
            .unwrap();
        assert_eq!(y1, y4);
    }

    #[test]
    fn exact_data_at_constant_truth_is_a_fixed_point() {
        let m = generate_disk_mesh(0.2).unwrap();
        let truth = NodalField::constant(&m, 1.0);
        let ds = exact_data(&m, &truth, &[BoundaryFlux::X1, BoundaryFlux::X2]);
        let cfg = ReconConfig {
            outer_iters: 3,
            ..Default::default()
        };
        let (s, hist) = reconstruct(&m, &ds, &truth, &cfg, Some(&truth)).unwrap();
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-8));
        assert!(hist.final_record().e_l1 < 1e-8);
    }

    #[test]
    fn large_beta_leaves_constant_start_flat() {
        // with a huge penalty the step minimizes β‖∇(σ+κ)‖²_{w₀}, which
        // vanishes for constant σ, so κ stays close to a constant
        let m = generate_disk_mesh(0.2).unwrap();
        let truth = NodalField::from_fn(&m, |p| 1.0 + 0.2 * p[0]);
        let ds = exact_data(&m, &truth, &[BoundaryFlux::X1]);
        let sigma = NodalField::constant(&m, 1.0);
        let fs = solve_all(&m, &sigma, &ds, &ForwardOptions::default(), 1).unwrap();
        let cfg = ReconConfig {
            beta: 1e6,
            cg_iters: 50,
            ..Default::default()
        };
        let step = solve_linearized_step(&m, &fs, &ds, &sigma, &NodalField::zeros(&m), &cfg).unwrap();
        let spread = step.kappa.max() - step.kappa.min();
        assert!(spread < 1e-4, "spread {spread}");
    }

    #[test]
    fn iterates_stay_in_box_and_runs_are_deterministic() {
        let m = generate_disk_mesh(0.2).unwrap();
        let truth = NodalField::from_fn(&m, |p| if p[0] > 0.2 { 1.4 } else { 0.7 });
        let ds = exact_data(&m, &truth, &[BoundaryFlux::X1, BoundaryFlux::X2]);
        let cfg = ReconConfig {
            outer_iters: 4,
            box_low: 0.9,
            box_high: 1.1,
            record_time: false,
            ..Default::default()
        };
        let sigma0 = NodalField::constant(&m, 1.0);
        let (s1, h1) = reconstruct(&m, &ds, &sigma0, &cfg, Some(&truth)).unwrap();
        assert!(s1.iter().all(|&v| (0.9..=1.1).contains(&v)));
        let (s2, h2) = reconstruct(&m, &ds, &sigma0, &ReconConfig { threads: 2, ..cfg }, Some(&truth)).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(h1, h2);
        assert_eq!(h1.initial.k, 0);
        assert!(h1.records.iter().enumerate().all(|(i, r)| r.k == i + 1));
    }

    #[test]
    fn missing_truth_gives_nan_errors() {
        let m = generate_disk_mesh(0.2).unwrap();
        let truth = NodalField::constant(&m, 1.2);
        let ds = exact_data(&m, &truth, &[BoundaryFlux::X1]);
        let cfg = ReconConfig {
            outer_iters: 1,
            ..Default::default()
        };
        let (_, h) = reconstruct(&m, &ds, &NodalField::constant(&m, 1.0), &cfg, None).unwrap();
        assert!(h.final_record().e_l1.is_nan());
        assert!(h.final_record().j_beta.is_finite());
    }

    #[test]
    fn reconstruct_rejects_bad_input() {
        let m = generate_disk_mesh(0.2).unwrap();
        let other = generate_disk_mesh(0.15).unwrap();
        let s = NodalField::constant(&m, 1.0);
        assert!(reconstruct(&m, &[], &s, &ReconConfig::default(), None).is_err());
        let ds = vec![dummy(&other, BoundaryFlux::X1)];
        assert!(reconstruct(&m, &ds, &s, &ReconConfig::default(), None).is_err());
    }
}
