use aet_core::fem::NeumannOptions;
use aet_core::forward::{
    adjoint_applied, linearized_forward, mass_inner, solve_forward, ForwardOptions,
};
use aet_core::mesh::generate_disk_mesh;
use aet_core::rng::SplitMix64;
use aet_core::{Mesh, NodalField};

fn x1(p: [f64; 2]) -> f64 {
    p[0]
}

fn tight() -> ForwardOptions {
    ForwardOptions {
        solver: NeumannOptions {
            tol: 1e-13,
            maxit: Some(5000),
            jacobi: false,
        },
        ..Default::default()
    }
}

/// Smooth random field `offset + amp * sin(a x + b y + c)`.
fn smooth_field(mesh: &Mesh, rng: &mut SplitMix64, offset: f64, amp: f64) -> NodalField {
    let (a, b, c) = (rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(0.0, 6.0));
    NodalField::from_fn(mesh, |p| offset + amp * (a * p[0] + b * p[1] + c).sin())
}

fn random_field(mesh: &Mesh, rng: &mut SplitMix64, lo: f64, hi: f64) -> NodalField {
    NodalField::new(mesh, (0..mesh.num_nodes()).map(|_| rng.uniform(lo, hi)).collect()).unwrap()
}

fn l1(mesh: &Mesh, v: &[f64]) -> f64 {
    mass_inner(mesh, &vec![1.0; v.len()], &v.iter().map(|x| x.abs()).collect::<Vec<_>>())
}

#[test]
fn scaling_law() {
    let mesh = generate_disk_mesh(0.1).unwrap();
    let mut rng = SplitMix64::new(3);
    let sigma = smooth_field(&mesh, &mut rng, 1.0, 0.3);
    let base = solve_forward(&mesh, &sigma, x1, &tight()).unwrap();
    for alpha in [0.5, 2.0] {
        let scaled = solve_forward(&mesh, &sigma.map(|s| alpha * s), x1, &tight()).unwrap();
        for i in 0..mesh.num_nodes() {
            assert!((scaled.u[i] - base.u[i] / alpha).abs() <= 1e-8);
            assert!((scaled.h[i] - base.h[i] / alpha).abs() <= 1e-7 * base.h.max());
        }
    }
}

#[test]
fn linearization_is_linear() {
    let mesh = generate_disk_mesh(0.15).unwrap();
    let mut rng = SplitMix64::new(5);
    let sigma = smooth_field(&mesh, &mut rng, 1.0, 0.2);
    let fs = solve_forward(&mesh, &sigma, x1, &tight()).unwrap();
    let k1 = smooth_field(&mesh, &mut rng, 0.0, 0.1);
    let k2 = smooth_field(&mesh, &mut rng, 0.0, 0.1);
    let combo = k1.zip_map(&k2, |a, b| 2.0 * a - 0.5 * b);
    let d1 = linearized_forward(&mesh, &fs, &k1).unwrap();
    let d2 = linearized_forward(&mesh, &fs, &k2).unwrap();
    let dc = linearized_forward(&mesh, &fs, &combo).unwrap();
    for i in 0..mesh.num_nodes() {
        assert!((dc[i] - (2.0 * d1[i] - 0.5 * d2[i])).abs() < 1e-9);
    }
}

#[test]
fn difference_quotient_converges_linearly() {
    let mesh = generate_disk_mesh(0.1).unwrap();
    let mut rng = SplitMix64::new(11);
    let sigma = smooth_field(&mesh, &mut rng, 1.0, 0.2);
    let kappa = smooth_field(&mesh, &mut rng, 0.0, 0.1);
    let fs = solve_forward(&mesh, &sigma, x1, &tight()).unwrap();
    let dh = linearized_forward(&mesh, &fs, &kappa).unwrap();
    let mut defects = Vec::new();
    for t in [1e-2, 1e-3, 1e-4] {
        let shifted = sigma.zip_map(&kappa, |s, k| s + t * k);
        let ft = solve_forward(&mesh, &shifted, x1, &tight()).unwrap();
        let diff: Vec<f64> = (0..mesh.num_nodes())
            .map(|i| (ft.h[i] - fs.h[i]) / t - dh[i])
            .collect();
        defects.push(l1(&mesh, &diff));
    }
    for w in defects.windows(2) {
        let slope = (w[0] / w[1]).log10();
        assert!((slope - 1.0).abs() <= 0.2, "defects {defects:?}");
    }
}

#[test]
fn adjoint_consistency() {
    let mesh = generate_disk_mesh(0.1).unwrap();
    let mut rng = SplitMix64::new(17);
    let sigma = smooth_field(&mesh, &mut rng, 1.0, 0.3);
    let fs = solve_forward(&mesh, &sigma, |p| (p[0] - p[1]) / 2f64.sqrt(), &tight()).unwrap();
    for _ in 0..10 {
        let kappa = random_field(&mesh, &mut rng, -1.0, 1.0);
        let zeta = random_field(&mesh, &mut rng, -1.0, 1.0);
        let lhs = mass_inner(&mesh, &linearized_forward(&mesh, &fs, &kappa).unwrap(), &zeta);
        let rhs = mass_inner(&mesh, &kappa, &adjoint_applied(&mesh, &fs, &zeta).unwrap());
        let scale = mass_inner(&mesh, &kappa, &kappa).sqrt() * mass_inner(&mesh, &zeta, &zeta).sqrt();
        assert!((lhs - rhs).abs() <= 1e-8 * scale, "{lhs} vs {rhs}");
    }
}

/// Dense evaluation of `H'(σ)*ζ` on the two-triangle square from explicit
/// element quantities and a dense bordered solve for `v`.
#[test]
fn adjoint_matches_dense_two_triangle_computation() {
    use nalgebra::{DMatrix, DVector};
    let mesh = Mesh::unit_square();
    let sigma = NodalField::constant(&mesh, 1.0);
    let fs = solve_forward(&mesh, &sigma, x1, &tight()).unwrap();
    let zeta = NodalField::constant(&mesh, 1.0);
    let got = adjoint_applied(&mesh, &fs, &zeta).unwrap();

    // Dense stiffness with a gauge row (Σ_boundary-mass u = 0) appended.
    let n = 4;
    let mut k = DMatrix::<f64>::zeros(n + 1, n + 1);
    let stiff = fs.operator().stiffness().to_dense();
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = stiff[i][j];
        }
        // Every node of the square is a boundary node with mass 1.
        k[(i, n)] = 1.0;
        k[(n, i)] = 1.0;
    }
    // Right-hand side -(σζ ∇u, ∇φ_j) with σζ = 1 on both triangles.
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients()[t];
        let gu = fs.grad_u[t];
        for a in 0..3 {
            rhs[tri[a]] -= mesh.areas()[t] * (gu[0] * g[a][0] + gu[1] * g[a][1]);
        }
    }
    let v = k.lu().solve(&rhs).unwrap();
    let vn: Vec<f64> = (0..n).map(|i| v[i]).collect();
    let grad_v = mesh.gradients(&vn);
    for i in 0..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for &t in &mesh.node_triangles()[i] {
            let gu = fs.grad_u[t];
            let q = gu[0] * gu[0] + gu[1] * gu[1] + 2.0 * (gu[0] * grad_v[t][0] + gu[1] * grad_v[t][1]);
            num += mesh.areas()[t] * q;
            den += mesh.areas()[t];
        }
        assert!((got[i] - num / den).abs() < 1e-10, "node {i}: {} vs {}", got[i], num / den);
    }
}

#[test]
fn power_density_converges_under_refinement() {
    let sizes = [0.2, 0.1, 0.05, 0.025];
    let finest = generate_disk_mesh(sizes[3]).unwrap();
    let sigma_fn = |p: [f64; 2]| 1.0 + 0.3 * (2.0 * p[0]).sin() * p[1];
    let mut h_fields = Vec::new();
    for &h in &sizes {
        let mesh = generate_disk_mesh(h).unwrap();
        let fs = solve_forward(&mesh, &NodalField::from_fn(&mesh, sigma_fn), x1, &Default::default()).unwrap();
        let on_finest = aet_core::mesh::interpolate_p1(&mesh, &fs.h, &finest).unwrap();
        h_fields.push(on_finest);
    }
    let diffs: Vec<f64> = h_fields
        .windows(2)
        .map(|w| l1(&finest, &w[0].zip_map(&w[1], |a, b| a - b)))
        .collect();
    for w in diffs.windows(2) {
        assert!(w[1] < w[0], "{diffs:?}");
    }
}

/// Discrete W^{1,4} norms of u_h stay bounded under refinement for random
/// conductivities in [0.8, 1.25].
#[test]
fn discrete_w14_norm_is_bounded() {
    let mut rng = SplitMix64::new(23);
    let mut norms = Vec::new();
    for h in [0.2, 0.1, 0.05] {
        let mesh = generate_disk_mesh(h).unwrap();
        let sigma = random_field(&mesh, &mut rng, 0.8, 1.25);
        let fs = solve_forward(&mesh, &sigma, x1, &Default::default()).unwrap();
        let grad4: f64 = fs
            .grad_u
            .iter()
            .zip(mesh.areas())
            .map(|(g, a)| a * (g[0] * g[0] + g[1] * g[1]).powi(2))
            .sum();
        let u4 = mass_inner(&mesh, &vec![1.0; mesh.num_nodes()], &fs.u.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
        norms.push((grad4 + u4).powf(0.25));
    }
    let first = norms[0];
    for n in &norms {
        assert!(*n <= 2.0 * first, "{norms:?}");
    }
}
