//! Property suites behind the `verify` subcommand. Each suite compares
//! production code with an independent oracle and reports one [`Check`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

use crate::elliptic_estimator::{EllipticEstimatorHandle, EllipticLoad};
use crate::error::Result;
use crate::experiment::{run_matrix, RunConfig, RunRecord};
use crate::fem1d::{assemble_load, sup_norm_sampled, Discretization, NodalField};
use crate::parabolic_estimator::compute_weights;
use crate::problem::{
    builtin_test_problem, GreensBounds, ProblemConfig, ProblemSpec, SourceConfig, SpaceFnConfig,
};
use crate::reconstruction::{compute_star_defects, PsiFamily};
use crate::timestepper::{delta_t, run, InitialApprox, TimeGrid};

/// Samples per element used by the oracles; deliberately different from
/// the estimator's sampling.
const ORACLE_SAMPLES: usize = 33;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `y = (1 - x^2) e^x` on `(-1, 1)` and the load `-eps y'' + r y` that
/// produces it.
pub fn manufactured_elliptic(
    spec: &ProblemSpec,
) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64 + Sync) {
    let y = |x: f64| (1.0 - x * x) * x.exp();
    let eps = spec.diffusion;
    let r = spec.reaction.clone();
    let g = move |x: f64| {
        let ypp = -(1.0 + 4.0 * x + x * x) * x.exp();
        -eps * ypp + r(x) * y(x)
    };
    (y, g)
}

/// One row of the elliptic reliability study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticRow {
    pub elements: usize,
    pub error: f64,
    pub eta: f64,
}

/// Solves the manufactured elliptic problem with the operator of `spec`
/// on `(-1, 1)` and returns the true error and the estimate per mesh.
pub fn elliptic_study(
    spec: &ProblemSpec,
    meshes: &[usize],
    estimator: &EllipticEstimatorHandle,
) -> Result<Vec<EllipticRow>> {
    let (y, g) = manufactured_elliptic(spec);
    meshes
        .iter()
        .map(|&n| {
            let disc = Discretization::uniform(spec, n)?;
            let y_h =
                NodalField::from_interior(&disc.stiffness.solve(&assemble_load(&disc.mesh, &g))?);
            let error = sup_norm_sampled(&disc.mesh, ORACLE_SAMPLES, |e, x| {
                y_h.eval_in(&disc.mesh, e, x) - y(x)
            });
            let eta = estimator.eval(
                &disc,
                &y_h,
                &EllipticLoad {
                    pointwise: &g,
                    discrete: None,
                },
            );
            Ok(EllipticRow {
                elements: n,
                error,
                eta,
            })
        })
        .collect()
}

pub fn elliptic_reliability(estimator: &EllipticEstimatorHandle) -> Result<Check> {
    let spec = builtin_test_problem();
    let meshes = [8, 16, 32, 64, 128, 256, 512];
    let rows = elliptic_study(&spec, &meshes, estimator)?;
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0_f64;
    for r in &rows {
        let ratio = r.eta / r.error;
        worst_ratio = worst_ratio.max(ratio);
        if r.eta.is_nan() || r.eta < r.error {
            failures.push(format!(
                "N={} eta {:.3e} < error {:.3e}",
                r.elements, r.eta, r.error
            ));
        }
        if ratio.is_nan() || ratio > 100.0 {
            failures.push(format!("N={} eta/error {ratio:.1} > 100", r.elements));
        }
    }
    for w in rows.windows(2) {
        let q = w[0].eta / w[1].eta;
        if (q - 4.0).abs() > 0.5 {
            failures.push(format!("N={} eta ratio {q:.3}", w[1].elements));
        }
    }
    Ok(Check {
        name: "elliptic estimator reliability".into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("meshes 8..512, max eta/error {worst_ratio:.2}")
        } else {
            failures.join("; ")
        },
    })
}

/// Problems used by the identity suite.
pub fn identity_problems() -> Result<Vec<ProblemSpec>> {
    let mut third = ProblemConfig::builtin_test_problem();
    third.name = "polynomial-source".into();
    third.reaction = SpaceFnConfig::Constant { value: 2.0 };
    third.source = SourceConfig::TimePolynomial {
        coeffs: vec![1.0, -3.0, 4.0, 2.0],
    };
    third.initial = SpaceFnConfig::SineHump { amplitude: 0.5 };
    Ok(vec![
        builtin_test_problem(),
        ProblemConfig::manufactured_sine_decay().build()?,
        third.build()?,
    ])
}

/// Largest relative violation of the discrete identities on one problem
/// and mesh.
pub fn identity_defect(spec: &ProblemSpec, elements: usize, steps: usize) -> Result<f64> {
    let disc = Discretization::uniform(spec, elements)?;
    let grid = TimeGrid::uniform(spec.horizon, steps)?;
    let traj = run(&disc, &grid, InitialApprox::Interpolant)?;
    let psi = PsiFamily::compute(&disc, &traj)?;
    let rel = |a: &NodalField, b: &NodalField| a.max_abs_diff(b) / b.sup_norm().max(1.0);
    let mut worst = 0.0_f64;
    for j in 0..=steps {
        let u = traj.w_at(j).lincomb(2.0, &traj.v[j], -1.0);
        worst = worst.max(rel(&traj.u[j], &u));
        let pu = psi.w_at(j).lincomb(2.0, &psi.psi_v[j], -1.0);
        worst = worst.max(rel(&psi.psi_u[j], &pu));
    }
    for j in 1..=steps {
        let tau = grid.tau(j);
        let dv = delta_t(&traj.v[j], &traj.v[j - 1], tau).scaled(-1.0);
        worst = worst.max(rel(&psi.psi_v[j], &dv));
        let first = traj
            .w_at(j - 1)
            .lincomb(2.0 / tau, traj.w_half(j), -2.0 / tau);
        worst = worst.max(rel(psi.w_half(j), &first));
        let second = traj.w_half(j).lincomb(2.0 / tau, traj.w_at(j), -2.0 / tau);
        worst = worst.max(rel(psi.w_at(j), &second));
    }
    let scale = disc.stiffness.norm_inf();
    for star in compute_star_defects(&traj, &psi) {
        let d = star.galerkin_defect(&disc);
        let size = scale * star.z_star.sup_norm().max(1.0);
        worst = worst.max(d.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / size);
    }
    Ok(worst)
}

pub fn identity_suite() -> Result<Check> {
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for spec in identity_problems()? {
        for (elements, steps) in [(8, 4), (32, 16), (128, 64)] {
            let d = identity_defect(&spec, elements, steps)?;
            worst = worst.max(d);
            if d.is_nan() || d > 1e-10 {
                failures.push(format!("{} N={elements}: {d:.2e}", spec.name));
            }
        }
    }
    Ok(Check {
        name: "discrete identities".into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("3 problems x 3 meshes, worst relative defect {worst:.2e}")
        } else {
            failures.join("; ")
        },
    })
}

/// Adaptive Simpson quadrature to relative tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // `ends` are `(a, b)` and `vals` the values at `a`, the midpoint and `b`
    fn step(
        f: &dyn Fn(f64) -> f64,
        ends: (f64, f64),
        vals: [f64; 3],
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (a, b) = ends;
        let [fa, fm, fb] = vals;
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, (a, m), [fa, flm, fm], left, tol / 2.0, depth - 1)
            + step(f, (m, b), [fm, frm, fb], right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let abs_tol = tol * whole.abs().max(f64::MIN_POSITIVE);
    step(f, (a, b), [fa, fm, fb], whole, abs_tol, 40)
}

/// Random non-uniform grid on `[0, horizon]` with `steps` intervals.
pub fn random_grid(rng: &mut impl Rng, horizon: f64, steps: usize) -> TimeGrid {
    let mut cuts: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = cuts.iter().sum();
    let mut t = 0.0;
    let mut times = vec![0.0];
    for c in cuts.iter_mut().take(steps - 1) {
        t += *c / total * horizon;
        times.push(t);
    }
    times.push(horizon);
    TimeGrid::new(times).expect("increasing grid")
}

/// Largest relative mismatch between the closed-form weights and
/// quadrature of their defining integrals.
pub fn weight_defect(grid: &TimeGrid, greens: &GreensBounds) -> f64 {
    let w = compute_weights(grid, greens);
    let m = grid.steps();
    let horizon = grid.horizon();
    let rel = |a: f64, b: f64| {
        if a == b {
            0.0
        } else {
            (a - b).abs() / b.abs().max(1e-300)
        }
    };
    let mut worst = 0.0_f64;
    for j in 0..=m {
        let sigma = (-greens.gamma * (horizon - grid.t(j))).exp();
        worst = worst.max(rel(w.sigma[j], sigma));
    }
    for j in 1..=m {
        let (t0, t1) = (grid.t(j - 1), grid.t(j));
        let kernel = |s: f64| greens.kappa1 / (horizon - s) + greens.kappa1_prime;
        if j < m || greens.kappa1 == 0.0 {
            let mu = adaptive_simpson(&kernel, t0, t1, 1e-13);
            worst = worst.max(rel(w.mu[j], mu));
        } else if w.mu[j] != f64::INFINITY {
            worst = f64::INFINITY;
        }
        // (t_j - s) / (T - s) is 1 on the last interval
        let ratio = |s: f64| {
            if j == m {
                1.0
            } else {
                (t1 - s) / (horizon - s)
            }
        };
        let chi_kernel =
            |s: f64| 0.5 * (s - t0) * (greens.kappa1 * ratio(s) + greens.kappa1_prime * (t1 - s));
        let integral = adaptive_simpson(&chi_kernel, t0, t1, 1e-13);
        let tau = t1 - t0;
        let chi = (greens.kappa0 * tau * tau / 4.0).min(integral);
        worst = worst.max(rel(w.chi[j], chi));
    }
    worst
}

pub fn weight_oracle(seed: u64, grids: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for g in 0..grids {
        let horizon = rng.gen_range(0.5..3.0);
        let steps = rng.gen_range(2..40);
        let grid = random_grid(&mut rng, horizon, steps);
        let greens = if g == 0 {
            builtin_test_problem().greens
        } else {
            GreensBounds {
                kappa0: rng.gen_range(0.5..2.0),
                kappa1: rng.gen_range(0.0..2.0),
                kappa1_prime: rng.gen_range(0.0..1.0),
                gamma: rng.gen_range(0.0..2.0),
            }
        };
        worst = worst.max(weight_defect(&grid, &greens));
    }
    Check {
        name: "Green's weights".into(),
        passed: worst <= 1e-10,
        detail: format!("{grids} random grids, worst relative mismatch {worst:.2e}"),
    }
}

pub fn matrix_reliability(records: &[RunRecord]) -> Check {
    let mut failures = Vec::new();
    for r in records {
        match (r.e_m, r.eta) {
            (Some(e), Some(eta)) if eta >= e => {}
            (Some(e), Some(eta)) => failures.push(format!("M={} eta {eta:.3e} < e {e:.3e}", r.m)),
            _ => failures.push(format!(
                "M={} incomplete: {}",
                r.m,
                r.failure.as_deref().unwrap_or("missing values")
            )),
        }
    }
    Check {
        name: "bound above error".into(),
        passed: failures.is_empty() && !records.is_empty(),
        detail: if failures.is_empty() {
            let ms: Vec<String> = records.iter().map(|r| r.m.to_string()).collect();
            format!("M = {}", ms.join(", "))
        } else {
            failures.join("; ")
        },
    }
}

/// Runs every suite; the matrix suite uses `config`.
pub fn run_all(config: &RunConfig) -> Result<VerifyReport> {
    let estimator = EllipticEstimatorHandle::by_name(&config.estimator)?;
    let mut checks = vec![
        elliptic_reliability(&estimator)?,
        identity_suite()?,
        weight_oracle(0x5eed, 20),
    ];
    checks.push(matrix_reliability(&run_matrix(config)?));
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-13);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
        let v = adaptive_simpson(&|x: f64| 1.0 / x, 1.0, 2.0, 1e-13);
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn random_grid_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_grid(&mut rng, 2.0, 7);
        assert_eq!(g.steps(), 7);
        assert_eq!(g.horizon(), 2.0);
    }

    #[test]
    fn suites_pass() {
        let estimator = EllipticEstimatorHandle::default();
        let c = elliptic_reliability(&estimator).unwrap();
        assert!(c.passed, "{c}");
        let c = identity_suite().unwrap();
        assert!(c.passed, "{c}");
        let c = weight_oracle(7, 20);
        assert!(c.passed, "{c}");
    }

    #[test]
    fn reaction_free_study_is_tight_for_quadratics() {
        let mut spec = builtin_test_problem();
        spec.reaction = std::sync::Arc::new(|_| 0.0);
        let rows = elliptic_study(&spec, &[8, 32], &EllipticEstimatorHandle::default()).unwrap();
        for r in rows {
            assert!(r.eta >= r.error && r.eta <= 10.0 * r.error, "{r:?}");
        }
    }

    #[test]
    fn incomplete_rows_fail() {
        let rec = RunRecord {
            m: 4,
            elements: 8,
            e_m: None,
            p_m: None,
            eta: Some(1.0),
            chi_m: None,
            columns: None,
            solve_seconds: 0.0,
            metadata: None,
            failure: Some("oracle: gave up".into()),
        };
        assert!(!matrix_reliability(&[rec]).passed);
        assert!(!matrix_reliability(&[]).passed);
    }
}
