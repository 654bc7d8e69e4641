#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use parabolic_apost::problem::ProblemSpec;
use parabolic_apost::reference_oracle::{solve_reference, ReferenceOptions, ReferenceSolution};

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Composite 5-point Gauss rule on `pieces` equal subintervals.
pub fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            GAUSS5
                .iter()
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Hat function of node `i` on `nodes`, with its derivative.
pub fn hat(nodes: &[f64], i: usize, x: f64) -> (f64, f64) {
    if i > 0 && x >= nodes[i - 1] && x <= nodes[i] {
        let h = nodes[i] - nodes[i - 1];
        return ((x - nodes[i - 1]) / h, 1.0 / h);
    }
    if i + 1 < nodes.len() && x >= nodes[i] && x <= nodes[i + 1] {
        let h = nodes[i + 1] - nodes[i];
        return ((nodes[i + 1] - x) / h, -1.0 / h);
    }
    (0.0, 0.0)
}

/// Integral over the whole mesh, element by element so that kinks sit on
/// subinterval boundaries.
pub fn mesh_integral(nodes: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    nodes.windows(2).map(|w| gauss(&f, w[0], w[1], 16)).sum()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Cholesky factorisation; `None` if the matrix is not positive definite.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Reference solution at the final time, cached across test binaries.
pub fn reference(spec: &ProblemSpec, finest_elements: usize, tol: f64) -> ReferenceSolution {
    let cache = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("reference-cache");
    let options =
        ReferenceOptions::for_production_mesh(finest_elements).with_cache_dir(Some(cache));
    solve_reference(spec, tol, &options).expect("reference solution")
}

pub fn eoc(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).ln() / std::f64::consts::LN_2
}
