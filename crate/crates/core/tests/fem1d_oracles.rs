#![allow(clippy::needless_range_loop)]

mod common;

use common::{cholesky, dense_solve, hat, mesh_integral};
use parabolic_apost::fem1d::{
    assemble_load, assemble_mass, assemble_stiffness, solve_tridiagonal, sup_norm_sampled,
    Discretization, NodalField, SpatialMesh, TriDiagonal,
};
use parabolic_apost::problem::builtin_test_problem;
use parabolic_apost::reconstruction::compute_psi;
use parabolic_apost::{estimate, EstimateOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{what}: {a} vs {b}");
}

/// Dense-quadrature entries of the bilinear form over interior hats.
fn oracle_matrix(
    nodes: &[f64],
    eps: f64,
    r: impl Fn(f64) -> f64,
    mass_only: bool,
) -> Vec<Vec<f64>> {
    let n = nodes.len() - 2;
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = mesh_integral(nodes, |x| {
                let (pi, di) = hat(nodes, i + 1, x);
                let (pj, dj) = hat(nodes, j + 1, x);
                if mass_only {
                    pi * pj
                } else {
                    eps * di * dj + r(x) * pi * pj
                }
            });
        }
    }
    a
}

fn assert_matches(m: &TriDiagonal, oracle: &[Vec<f64>], tol: f64) {
    let dense = m.to_dense();
    for (i, row) in oracle.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_close(dense[i][j], *v, tol, &format!("entry ({i},{j})"));
        }
    }
}

#[test]
fn laplacian_stencil() {
    let mesh = SpatialMesh::uniform(0.0, 1.0, 8).unwrap();
    let h = 0.125;
    let a = assemble_stiffness(&mesh, 1.0, &|_| 0.0).unwrap();
    for i in 0..a.dim() {
        assert_close(a.diag[i], 2.0 / h, 1e-14, "diag");
        if i > 0 {
            assert_close(a.lower[i], -1.0 / h, 1e-14, "lower");
        }
    }
}

#[test]
fn unit_reaction_stencil() {
    let mesh = SpatialMesh::uniform(0.0, 1.0, 10).unwrap();
    let h = 0.1;
    let a = assemble_stiffness(&mesh, 1.0, &|_| 1.0).unwrap();
    for i in 0..a.dim() {
        assert_close(a.diag[i], 2.0 / h + 2.0 * h / 3.0, 1e-13, "diag");
        if i + 1 < a.dim() {
            assert_close(a.upper[i], -1.0 / h + h / 6.0, 1e-13, "upper");
        }
    }
    let oracle = oracle_matrix(mesh.nodes(), 1.0, |_| 1.0, false);
    assert_matches(&a, &oracle, 1e-12);
}

#[test]
fn test_problem_stiffness_matches_dense_quadrature() {
    let spec = builtin_test_problem();
    let mesh = SpatialMesh::uniform_for(&spec, 4).unwrap();
    let a = assemble_stiffness(&mesh, spec.diffusion, spec.reaction.as_ref()).unwrap();
    let oracle = oracle_matrix(mesh.nodes(), spec.diffusion, |x| 5.0 * x + 6.0, false);
    assert_matches(&a, &oracle, 1e-12);
}

#[test]
fn mass_matrix() {
    let mesh = SpatialMesh::uniform(0.0, 1.0, 8).unwrap();
    let h = 0.125;
    let m = assemble_mass(&mesh);
    for i in 0..m.dim() {
        assert_close(m.diag[i], 2.0 * h / 3.0, 1e-15, "diag");
        if i > 0 {
            assert_close(m.lower[i], h / 6.0, 1e-15, "lower");
        }
    }
    // interior rows away from the boundary sum to the hat integral
    let sums = m.mul_vec(&vec![1.0; m.dim()]);
    for s in &sums[1..sums.len() - 1] {
        assert_close(*s, h, 1e-15, "row sum");
    }

    let nodes = vec![0.0, 0.2, 0.5, 1.0];
    let mesh = SpatialMesh::new(nodes.clone()).unwrap();
    let oracle = oracle_matrix(&nodes, 0.0, |_| 0.0, true);
    assert_matches(&assemble_mass(&mesh), &oracle, 1e-13);
}

#[test]
fn loads() {
    let mesh = SpatialMesh::uniform(0.0, 1.0, 4).unwrap();
    for l in assemble_load(&mesh, &|_| 1.0) {
        assert_close(l, 0.25, 1e-15, "unit load");
    }
    let mesh = SpatialMesh::uniform(0.0, 1.0, 2).unwrap();
    let l = assemble_load(&mesh, &|x| x);
    assert_close(l[0], 0.25, 1e-15, "x load");

    let spec = builtin_test_problem();
    let mesh = SpatialMesh::uniform_for(&spec, 256).unwrap();
    let f = &spec.source;
    let load = assemble_load(&mesh, &|x| f(x, 0.0));
    let nodes = mesh.nodes();
    for (i, l) in load.iter().enumerate() {
        let lo = nodes[i];
        let hi = nodes[i + 2];
        let exact = common::gauss(|x| f(x, 0.0) * hat(nodes, i + 1, x).0, lo, nodes[i + 1], 8)
            + common::gauss(|x| f(x, 0.0) * hat(nodes, i + 1, x).0, nodes[i + 1], hi, 8);
        assert!((l - exact).abs() <= 1e-10, "node {i}: {l} vs {exact}");
    }
}

fn random_dominant(rng: &mut impl Rng, n: usize) -> TriDiagonal {
    let mut m = TriDiagonal::zeros(n);
    for i in 0..n {
        if i > 0 {
            m.lower[i] = rng.gen_range(-1.0..1.0);
        }
        if i + 1 < n {
            m.upper[i] = rng.gen_range(-1.0..1.0);
        }
        m.diag[i] = (m.lower[i].abs() + m.upper[i].abs() + rng.gen_range(0.1..2.0))
            * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    }
    m
}

#[test]
fn thomas_matches_dense_lu() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10 {
        let m = random_dominant(&mut rng, 50);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let x = solve_tridiagonal(&m, &b).unwrap();
        let y = dense_solve(m.to_dense(), b.clone());
        for (a, c) in x.iter().zip(&y) {
            assert!((a - c).abs() <= 1e-12 * (1.0 + c.abs()), "{a} vs {c}");
        }
    }
}

#[test]
fn thomas_trivial_cases() {
    let b = vec![1.0, -2.0, 3.5];
    assert_eq!(solve_tridiagonal(&TriDiagonal::identity(3), &b).unwrap(), b);

    let mesh = SpatialMesh::uniform(0.0, 1.0, 20).unwrap();
    let a = assemble_stiffness(&mesh, 1.0, &|_| 0.0).unwrap();
    let known: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.7).sin()).collect();
    let x = a.solve(&a.mul_vec(&known)).unwrap();
    for (p, q) in x.iter().zip(&known) {
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn symmetric_and_positive_definite() {
    let spec = builtin_test_problem();
    for n in [3, 6, 11] {
        let disc = Discretization::uniform(&spec, n).unwrap();
        for m in [&disc.stiffness, &disc.mass] {
            let d = m.to_dense();
            for i in 0..d.len() {
                for j in 0..d.len() {
                    assert_eq!(d[i][j], d[j][i]);
                }
            }
            assert!(cholesky(&d).is_some());
        }
    }
}

#[test]
fn galerkin_orthogonality_of_elliptic_solve() {
    let spec = builtin_test_problem();
    let disc = Discretization::uniform(&spec, 40).unwrap();
    let g = |x: f64| x.exp() * (1.0 + x);
    let load = assemble_load(&disc.mesh, &g);
    let y = NodalField::from_interior(&disc.stiffness.solve(&load).unwrap());
    let scale = load.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for (a, b) in disc.stiffness.apply(&y).iter().zip(&load) {
        assert!((a - b).abs() <= 1e-10 * scale);
    }
}

#[test]
fn sup_norms() {
    assert_eq!(
        NodalField::from_values(vec![0.0, 3.0, -5.0, 0.0]).sup_norm(),
        5.0
    );
    let mesh = SpatialMesh::uniform(0.0, 1.0, 64).unwrap();
    let s = sup_norm_sampled(&mesh, 9, |_, x| (std::f64::consts::PI * x).sin());
    assert!((s - 1.0).abs() < 5e-4);
}

#[test]
fn doubling_samples_barely_moves_residual_norm() {
    let spec = builtin_test_problem();
    let run = estimate(&spec, 32, 16, &EstimateOptions::default()).unwrap();
    let disc = &run.disc;
    let t = 1.0;
    let u = run.trajectory.final_field();
    let psi = compute_psi(disc, u, t).unwrap();
    let f = &spec.source;
    let r = &spec.reaction;
    let residual = |e: usize, x: f64| {
        f(x, t) + psi.eval_in(&disc.mesh, e, x) - r(x) * u.eval_in(&disc.mesh, e, x)
    };
    let coarse = sup_norm_sampled(&disc.mesh, 9, residual);
    let fine = sup_norm_sampled(&disc.mesh, 18, residual);
    assert!((fine - coarse).abs() < 0.01 * fine, "{coarse} vs {fine}");
}
