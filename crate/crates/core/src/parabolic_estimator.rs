//! Computable maximum-norm bound for the error at the final time.
//!
//! With Green's weights
//!
//! ```text
//!   sigma_j = e^{-gamma (T - t_j)}
//!   mu_j    = int_{I_j} kappa1 / (T - s) + kappa1' ds
//!   chi_j   = min{ kappa0 tau_j^2 / 4,
//!                  int_{I_j} (t_j - s)(s - t_{j-1}) / 2 (kappa1 / (T - s) + kappa1') ds }
//! ```
//!
//! the bound is
//!
//! ```text
//!   eta = kappa0 sigma_0 eta_init + eta_ell^{M,K}
//!       + sum_j sigma_j (kappa0 eta_F^j + chi_j eta_dpsi^j + eta_zh^j)
//! ```
//!
//! where `eta_ell^{M,K}` collects the elliptic estimators, split at `K`:
//! steps after `K` use difference quotients, steps up to `K` use the
//! time-derivative bound of the Green's function. The elliptic block enters
//! once, not once per step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic_estimator::{eta_ell, eta_ell_delta, eta_star, EllipticEstimatorHandle};
use crate::error::{Error, Result};
use crate::fem1d::Discretization;
use crate::problem::GreensBounds;
use crate::reconstruction::{PsiFamily, StarDefect};
use crate::timestepper::{delta_t, TimeGrid, Trajectory};

/// Per-step Green's weights. Index `j` refers to `t_j` (for `sigma`) or to
/// the interval `I_j` (for `mu` and `chi`, whose index 0 is unused and 0).
#[derive(Debug, Clone, PartialEq)]
pub struct GreenWeights {
    pub sigma: Vec<f64>,
    /// `+inf` on the last interval when `kappa1 > 0`.
    pub mu: Vec<f64>,
    pub chi: Vec<f64>,
}

/// `x + x^2/2 - (1+x) ln(1+x)`, accurate for small `x`.
fn chi_kernel(x: f64) -> f64 {
    if x < 0.1 {
        // sum_{n>=3} (-1)^{n+1} x^n / (n (n-1))
        let mut term = x * x * x;
        let mut sum = 0.0;
        for n in 3..40 {
            let nf = n as f64;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * term / (nf * (nf - 1.0));
            term *= x;
            if term < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x + 0.5 * x * x - (1.0 + x) * x.ln_1p()
    }
}

pub fn compute_weights(grid: &TimeGrid, greens: &GreensBounds) -> GreenWeights {
    let m = grid.steps();
    let horizon = grid.horizon();
    let GreensBounds {
        kappa0,
        kappa1,
        kappa1_prime,
        gamma,
    } = *greens;
    let sigma = (0..=m)
        .map(|j| {
            if j == m {
                1.0
            } else {
                (-gamma * (horizon - grid.t(j))).exp()
            }
        })
        .collect();
    let mut mu = vec![0.0; m + 1];
    let mut chi = vec![0.0; m + 1];
    for j in 1..=m {
        let tau = grid.tau(j);
        let a = if j == m { 0.0 } else { horizon - grid.t(j) };
        let b = horizon - grid.t(j - 1);
        let (log_part, chi_integral) = if a > 0.0 {
            // ln(b/a) and (b^2 - a^2)/2 - a b ln(b/a), written in x = (b - a)/a
            let x = (b - a) / a;
            (x.ln_1p(), a * a * chi_kernel(x))
        } else {
            (f64::INFINITY, 0.5 * b * b)
        };
        mu[j] = if kappa1 > 0.0 {
            kappa1 * log_part + kappa1_prime * tau
        } else {
            kappa1_prime * tau
        };
        let integral_arm = 0.5 * kappa1 * chi_integral + kappa1_prime * tau.powi(3) / 12.0;
        chi[j] = (kappa0 * tau * tau / 4.0).min(integral_arm);
    }
    GreenWeights { sigma, mu, chi }
}

/// How `eta_F^j = int_{I_j} |(F - F_hat)(s)|_inf ds` is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaFMode {
    /// `tau_j / 6 |f^j - 2 f^{j-1/2} + f^{j-1}|_inf`
    #[default]
    SimpsonPaper,
    /// Five-point Gauss rule in time, sampled maximum in space.
    Quadrature,
}

impl EtaFMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "simpson-paper" => Ok(EtaFMode::SimpsonPaper),
            "quadrature" => Ok(EtaFMode::Quadrature),
            _ => Err(Error::Unknown {
                what: "eta_F mode",
                name: name.to_owned(),
            }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EtaFMode::SimpsonPaper => "simpson-paper",
            EtaFMode::Quadrature => "quadrature",
        }
    }

    pub fn other(self) -> Self {
        match self {
            EtaFMode::SimpsonPaper => EtaFMode::Quadrature,
            EtaFMode::Quadrature => EtaFMode::SimpsonPaper,
        }
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `eta_F^j`, `j >= 1`.
pub fn eta_f(j: usize, disc: &Discretization, grid: &TimeGrid, mode: EtaFMode) -> f64 {
    let f = &disc.spec.source;
    let (t0, t1, tau) = (grid.t(j - 1), grid.t(j), grid.tau(j));
    match mode {
        EtaFMode::SimpsonPaper => {
            let tm = grid.t_half(j);
            tau / 6.0 * disc.sup_sampled(|_, x| f(x, t1) - 2.0 * f(x, tm) + f(x, t0))
        }
        EtaFMode::Quadrature => {
            // F - F_hat = f(s) - linear interpolant of f between t_{j-1} and t_j
            GAUSS5
                .iter()
                .map(|&(node, weight)| {
                    let s = t0 + 0.5 * tau * (1.0 + node);
                    let (l0, l1) = ((t1 - s) / tau, (s - t0) / tau);
                    0.5 * tau
                        * weight
                        * disc.sup_sampled(|_, x| f(x, s) - l0 * f(x, t0) - l1 * f(x, t1))
                })
                .sum()
        }
    }
}

/// `|u0 - u_h^0|_inf` by sampling.
pub fn eta_init(disc: &Discretization, traj: &Trajectory) -> f64 {
    let u0 = &disc.spec.initial;
    let uh0 = &traj.u[0];
    disc.sup_sampled(|e, x| u0(x) - uh0.eval_in(&disc.mesh, e, x))
}

/// `|delta_t psi_u^j|_inf`, exact for P1.
pub fn eta_dpsi(j: usize, psi: &PsiFamily, grid: &TimeGrid) -> f64 {
    delta_t(&psi.psi_u[j], &psi.psi_u[j - 1], grid.tau(j)).sup_norm()
}

pub fn eta_zh(
    star: &StarDefect,
    weights: &GreenWeights,
    greens: &GreensBounds,
    estimator: &EllipticEstimatorHandle,
    disc: &Discretization,
    grid: &TimeGrid,
) -> f64 {
    let j = star.j;
    let direct = greens.kappa0 * grid.tau(j) * star.residual_sup(disc);
    let mu = weights.mu[j];
    if !mu.is_finite() {
        return direct;
    }
    let by_parts = mu * (star.z_star.sup_norm() + eta_star(star, estimator, disc));
    direct.min(by_parts)
}

/// `eta_ell^{M,K}`. `eta_ell` is indexed `0..=M`, `eta_ell_delta` by step
/// (index 0 unused).
pub fn eta_ell_mk(
    k: usize,
    eta_ell: &[f64],
    eta_ell_delta: &[f64],
    weights: &GreenWeights,
    greens: &GreensBounds,
    grid: &TimeGrid,
) -> Result<f64> {
    let m = grid.steps();
    if k >= m {
        return Err(Error::SplitIndex { k, max: m - 1 });
    }
    let sigma = &weights.sigma;
    let late: f64 = (k + 1..=m)
        .map(|j| sigma[j] * grid.tau(j) * eta_ell_delta[j])
        .sum();
    let early: f64 = (1..=k)
        .map(|j| sigma[j] * weights.mu[j] * eta_ell[j].max(eta_ell[j - 1]))
        .sum();
    Ok(greens.kappa0 * (eta_ell[m] + sigma[k] * eta_ell[k] + late) + early)
}

/// Weighted contributions of each component; they add up to the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnTotals {
    /// `kappa0 sigma_0 eta_init`
    pub eta_init: f64,
    /// `sum_j sigma_j kappa0 eta_F^j`
    pub eta_f: f64,
    pub eta_ell_mk: f64,
    /// `sum_j sigma_j chi_j eta_dpsi^j`
    pub eta_dpsi: f64,
    /// `sum_j sigma_j eta_zh^j`
    pub eta_zh: f64,
}

impl ColumnTotals {
    pub fn sum(&self) -> f64 {
        self.eta_init + self.eta_f + self.eta_ell_mk + self.eta_dpsi + self.eta_zh
    }

    pub fn as_array(&self) -> [(&'static str, f64); 5] {
        [
            ("eta_init", self.eta_init),
            ("eta_F", self.eta_f),
            ("eta_ell_MK", self.eta_ell_mk),
            ("eta_dpsi", self.eta_dpsi),
            ("eta_zh", self.eta_zh),
        ]
    }
}

/// All components of the bound. Per-step vectors have length `M + 1`;
/// entries at index 0 are unused and zero except for `eta_ell`.
#[derive(Debug, Clone)]
pub struct EstimatorBreakdown {
    pub k: usize,
    pub eta_init: f64,
    pub eta_f: Vec<f64>,
    pub eta_ell: Vec<f64>,
    pub eta_ell_delta: Vec<f64>,
    pub eta_ell_mk: f64,
    pub eta_dpsi: Vec<f64>,
    pub eta_zh: Vec<f64>,
    pub weights: GreenWeights,
    pub greens: GreensBounds,
    pub columns: ColumnTotals,
    pub total: f64,
    pub eta_f_mode: EtaFMode,
    /// `sum_j sigma_j kappa0 eta_F^j` with the other [`EtaFMode`].
    pub eta_f_other_mode: f64,
}

impl EstimatorBreakdown {
    /// Sums the stored components in index order.
    pub fn recompute_total(&self) -> f64 {
        let g = &self.greens;
        let w = &self.weights;
        let mut total = g.kappa0 * w.sigma[0] * self.eta_init + self.eta_ell_mk;
        for j in 1..self.eta_f.len() {
            total += w.sigma[j]
                * (g.kappa0 * self.eta_f[j] + w.chi[j] * self.eta_dpsi[j] + self.eta_zh[j]);
        }
        total
    }

    /// Recomputes `eta_ell^{M,K}` and the total for a different split.
    pub fn with_split(&self, k: usize, grid: &TimeGrid) -> Result<Self> {
        let mut out = self.clone();
        out.k = k;
        out.eta_ell_mk = eta_ell_mk(
            k,
            &self.eta_ell,
            &self.eta_ell_delta,
            &self.weights,
            &self.greens,
            grid,
        )?;
        out.columns.eta_ell_mk = out.eta_ell_mk;
        out.total = out.recompute_total();
        Ok(out)
    }

    /// Split index minimising the total.
    pub fn best_split(&self, grid: &TimeGrid) -> Result<Self> {
        let mut best = self.with_split(0, grid)?;
        for k in 1..grid.steps() {
            let cand = self.with_split(k, grid)?;
            if cand.total < best.total {
                best = cand;
            }
        }
        Ok(best)
    }
}

pub fn assemble_total(
    disc: &Discretization,
    traj: &Trajectory,
    psi: &PsiFamily,
    stars: &[StarDefect],
    estimator: &EllipticEstimatorHandle,
    k: usize,
    eta_f_mode: EtaFMode,
) -> Result<EstimatorBreakdown> {
    let grid = &traj.grid;
    let m = grid.steps();
    if psi.psi_u.len() != m + 1 || stars.len() != m || traj.u.len() != m + 1 {
        return Err(Error::Dimension(format!(
            "trajectory has {} steps but got {} psi fields and {} star defects",
            m,
            psi.psi_u.len(),
            stars.len()
        )));
    }
    if k >= m {
        return Err(Error::SplitIndex { k, max: m - 1 });
    }
    let greens = disc.spec.greens;
    let weights = compute_weights(grid, &greens);

    let eta_ell_v: Vec<f64> = (0..=m)
        .into_par_iter()
        .map(|j| eta_ell(j, traj, psi, estimator, disc))
        .collect();
    let per_step: Vec<[f64; 5]> = (1..=m)
        .into_par_iter()
        .map(|j| {
            [
                eta_ell_delta(j, traj, psi, estimator, disc),
                eta_f(j, disc, grid, eta_f_mode),
                eta_f(j, disc, grid, eta_f_mode.other()),
                eta_dpsi(j, psi, grid),
                eta_zh(&stars[j - 1], &weights, &greens, estimator, disc, grid),
            ]
        })
        .collect();
    let column = |c: usize| -> Vec<f64> {
        std::iter::once(0.0)
            .chain(per_step.iter().map(|row| row[c]))
            .collect()
    };
    let eta_ell_delta_v = column(0);
    let eta_f_v = column(1);
    let eta_f_other = column(2);
    let eta_dpsi_v = column(3);
    let eta_zh_v = column(4);

    let init = eta_init(disc, traj);
    let ell_mk = eta_ell_mk(k, &eta_ell_v, &eta_ell_delta_v, &weights, &greens, grid)?;
    let sigma = &weights.sigma;
    let weighted = |v: &[f64], scale: &dyn Fn(usize) -> f64| -> f64 {
        (1..=m).map(|j| sigma[j] * scale(j) * v[j]).sum()
    };
    let columns = ColumnTotals {
        eta_init: greens.kappa0 * sigma[0] * init,
        eta_f: weighted(&eta_f_v, &|_| greens.kappa0),
        eta_ell_mk: ell_mk,
        eta_dpsi: weighted(&eta_dpsi_v, &|j| weights.chi[j]),
        eta_zh: weighted(&eta_zh_v, &|_| 1.0),
    };
    let eta_f_other_mode = weighted(&eta_f_other, &|_| greens.kappa0);
    let mut out = EstimatorBreakdown {
        k,
        eta_init: init,
        eta_f: eta_f_v,
        eta_ell: eta_ell_v,
        eta_ell_delta: eta_ell_delta_v,
        eta_ell_mk: ell_mk,
        eta_dpsi: eta_dpsi_v,
        eta_zh: eta_zh_v,
        weights,
        greens,
        columns,
        total: 0.0,
        eta_f_mode,
        eta_f_other_mode,
    };
    out.total = out.recompute_total();
    assert!(out.total.is_finite(), "estimator total is not finite");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_test_problem;
    use std::sync::Arc;

    #[test]
    fn weights_without_decay() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let w = compute_weights(&grid, &GreensBounds::new(1.0, 1.0, 0.0, 0.0).unwrap());
        assert!(w.sigma.iter().all(|&s| s == 1.0));
        assert!(w.mu[8].is_infinite());
        assert!(w.mu[1..8].iter().all(|m| m.is_finite() && *m >= 0.0));
    }

    #[test]
    fn mu_constant_integrand() {
        let grid = TimeGrid::new(vec![0.0, 0.1, 0.35, 0.5, 1.0]).unwrap();
        let c = 2.5;
        let w = compute_weights(&grid, &GreensBounds::new(1.0, 0.0, c, 0.3).unwrap());
        for j in 1..=4 {
            assert_eq!(w.mu[j], c * grid.tau(j));
        }
        assert!(w.mu[4].is_finite());
    }

    #[test]
    fn chi_kernel_branches_agree() {
        for x in [0.02, 0.05, 0.09, 0.0999] {
            let direct = x + 0.5 * x * x - (1.0 + x) * f64::ln_1p(x);
            assert!(((direct - chi_kernel(x)) / chi_kernel(x)).abs() < 1e-10);
        }
        let x: f64 = 1e-3;
        let series = x.powi(3) / 6.0 - x.powi(4) / 12.0 + x.powi(5) / 20.0;
        assert!(((chi_kernel(x) - series) / series).abs() < 1e-9);
    }

    #[test]
    fn chi_bounded_by_direct_arm() {
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let greens = builtin_test_problem().greens;
        let w = compute_weights(&grid, &greens);
        for j in 1..=16 {
            let cap = greens.kappa0 * grid.tau(j).powi(2) / 4.0;
            assert!(w.chi[j] >= 0.0 && w.chi[j] <= cap);
        }
        assert_eq!(w.sigma[16], 1.0);
        assert!(w.sigma.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn eta_f_examples() {
        let mut spec = builtin_test_problem();
        spec.source = Arc::new(|x, t| 2.0 * t + x);
        let disc = Discretization::uniform(&spec, 8).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.2, 0.5, 1.0]).unwrap();
        for j in 1..=3 {
            assert!(eta_f(j, &disc, &grid, EtaFMode::SimpsonPaper) < 1e-15);
            assert!(eta_f(j, &disc, &grid, EtaFMode::Quadrature) < 1e-15);
        }
        spec.source = Arc::new(|_, t| t * t);
        let disc = Discretization::uniform(&spec, 8).unwrap();
        for j in 1..=3 {
            let tau = grid.tau(j);
            let got = eta_f(j, &disc, &grid, EtaFMode::SimpsonPaper);
            assert!((got - tau.powi(3) / 12.0).abs() < 1e-15);
            // |t^2 - linear interpolant| = (s - t0)(t1 - s), integral tau^3 / 6
            let q = eta_f(j, &disc, &grid, EtaFMode::Quadrature);
            assert!((q - tau.powi(3) / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn split_index_range() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let greens = builtin_test_problem().greens;
        let w = compute_weights(&grid, &greens);
        let ell = vec![1.0; 5];
        let delta = vec![0.0, 1.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            eta_ell_mk(4, &ell, &delta, &w, &greens, &grid),
            Err(Error::SplitIndex { k: 4, max: 3 })
        ));
        let k0 = eta_ell_mk(0, &ell, &delta, &w, &greens, &grid).unwrap();
        let expect =
            greens.kappa0 * (1.0 + w.sigma[0] + (1..=4).map(|j| w.sigma[j] * 0.25).sum::<f64>());
        assert!((k0 - expect).abs() < 1e-15);
        let zeros = vec![0.0; 5];
        assert_eq!(
            eta_ell_mk(3, &zeros, &zeros, &w, &greens, &grid).unwrap(),
            0.0
        );
    }
}
