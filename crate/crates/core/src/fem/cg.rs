use crate::error::{AetError, Result};

#[derive(Debug, Clone)]
pub struct CgOptions {
    /// Stop once `‖b - A x‖ ≤ tol ‖b‖`.
    pub tol: f64,
    pub maxit: usize,
    /// Inverse diagonal for Jacobi preconditioning.
    pub inv_diag: Option<Vec<f64>>,
    /// Project residual and search direction onto zero-sum vectors every
    /// this many iterations (singular operators with constant kernel).
    pub deflate_constants_every: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            maxit: 1000,
            inv_diag: None,
            deflate_constants_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final relative residual `‖b - A x‖ / ‖b‖` (absolute when `b = 0`).
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub report: CgReport,
}

/// Conjugate gradients for a symmetric positive (semi)definite operator
/// given as `apply(x, y)` computing `y = A x`.
///
/// Returns the last iterate with `converged = false` when `maxit` is hit.
pub fn cg_solve<F>(mut apply: F, rhs: &[f64], x0: Option<&[f64]>, opts: &CgOptions) -> Result<CgSolution>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = rhs.len();
    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(AetError::Dimension {
                    expected: n,
                    found: x0.len(),
                });
            }
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = rhs.to_vec();
    let mut ap = vec![0.0; n];
    if x.iter().any(|&v| v != 0.0) {
        apply(&x, &mut ap)?;
        for (ri, ai) in r.iter_mut().zip(&ap) {
            *ri -= ai;
        }
    }

    let b_norm = norm(rhs);
    let threshold = opts.tol * b_norm;
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut r_norm = norm(&r);
    check_finite(r_norm, 0)?;
    if r_norm <= threshold {
        return Ok(done(x, 0, r_norm / scale, true));
    }

    let precondition = |r: &[f64], z: &mut Vec<f64>| match &opts.inv_diag {
        Some(d) => {
            z.clear();
            z.extend(r.iter().zip(d).map(|(a, b)| a * b));
        }
        None => {
            z.clear();
            z.extend_from_slice(r);
        }
    };

    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    for it in 1..=opts.maxit {
        apply(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        check_finite(pap, it)?;
        if pap <= 0.0 {
            // Search direction in the kernel: no further progress possible.
            return Ok(done(x, it - 1, r_norm / scale, false));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(every) = opts.deflate_constants_every {
            if every > 0 && it % every == 0 {
                remove_mean(&mut r);
                remove_mean(&mut p);
            }
        }
        r_norm = norm(&r);
        check_finite(r_norm, it)?;
        if r_norm <= threshold {
            return Ok(done(x, it, r_norm / scale, true));
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(done(x, opts.maxit, r_norm / scale, false))
}

fn done(x: Vec<f64>, iterations: usize, residual: f64, converged: bool) -> CgSolution {
    CgSolution {
        x,
        report: CgReport {
            iterations,
            residual,
            converged,
        },
    }
}

fn check_finite(v: f64, iterations: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(AetError::Divergence { iterations })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}
