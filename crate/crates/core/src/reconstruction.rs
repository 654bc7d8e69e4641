//! Discrete elliptic-reconstruction data.
//!
//! For a discrete field `phi_h` at time `t`, `psi` is the member of `V_h`
//! with `(psi, chi)_h = a_h(phi_h, chi) - (f(t), chi)_h` for all `chi`, so
//! that `phi_h` is the finite element solution of the elliptic problem with
//! load `f(t) + psi`. The sequences of `psi` for `v`, `w` and `u` are
//! computed by mass-matrix solves; the closed-form identities
//! (`psi_v^j = -delta_t v^j` and friends) are left as independent checks.

use rayon::prelude::*;

use crate::error::Result;
use crate::fem1d::{assemble_load, Discretization, NodalField};
use crate::problem::ProblemSpec;
use crate::timestepper::{w_half_slot, w_slot, Trajectory};

/// Solves `M psi = A phi - (f(., t), phi_i)_h`.
pub fn compute_psi(disc: &Discretization, phi: &NodalField, t: f64) -> Result<NodalField> {
    let mut rhs = disc.stiffness.apply(phi);
    for (r, l) in rhs.iter_mut().zip(disc.source_load(t)) {
        *r -= l;
    }
    Ok(NodalField::from_interior(&disc.mass.solve(&rhs)?))
}

#[derive(Debug, Clone)]
pub struct PsiFamily {
    pub psi_v: Vec<NodalField>,
    /// Same slot layout as [`Trajectory::w`].
    pub psi_w: Vec<NodalField>,
    pub psi_u: Vec<NodalField>,
}

impl PsiFamily {
    pub fn compute(disc: &Discretization, traj: &Trajectory) -> Result<Self> {
        let grid = &traj.grid;
        let psi_v = (0..traj.v.len())
            .into_par_iter()
            .map(|j| compute_psi(disc, &traj.v[j], grid.t(j)))
            .collect::<Result<Vec<_>>>()?;
        let psi_w = (0..traj.w.len())
            .into_par_iter()
            .map(|s| {
                let t = if s % 2 == 0 {
                    grid.t(s / 2)
                } else {
                    grid.t_half(s.div_ceil(2))
                };
                compute_psi(disc, &traj.w[s], t)
            })
            .collect::<Result<Vec<_>>>()?;
        let psi_u = (0..traj.u.len())
            .into_par_iter()
            .map(|j| compute_psi(disc, &traj.u[j], grid.t(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PsiFamily {
            psi_v,
            psi_w,
            psi_u,
        })
    }

    pub fn w_at(&self, j: usize) -> &NodalField {
        &self.psi_w[w_slot(j)]
    }

    pub fn w_half(&self, j: usize) -> &NodalField {
        &self.psi_w[w_half_slot(j)]
    }
}

/// Extrapolation defect of step `j`:
///
/// ```text
///   z*   = w^{j-1/2} - w^{j-1} - (v^j - v^{j-1}) / 2
///   psi* = psi_w^{j-1/2} - psi_w^{j-1} - (psi_v^j - psi_v^{j-1}) / 2
///   f*   = (f^j - 2 f^{j-1/2} + f^{j-1}) / 2
/// ```
///
/// `z*` is the finite element solution of the elliptic problem with load
/// `psi* - f*`.
#[derive(Debug, Clone)]
pub struct StarDefect {
    pub j: usize,
    pub z_star: NodalField,
    pub psi_star: NodalField,
    pub t_prev: f64,
    pub t_half: f64,
    pub t_curr: f64,
}

impl StarDefect {
    pub fn f_star(&self, spec: &ProblemSpec, x: f64) -> f64 {
        let f = &spec.source;
        0.5 * (f(x, self.t_curr) - 2.0 * f(x, self.t_half) + f(x, self.t_prev))
    }

    /// `|psi* - f*|_inf` by sampling.
    pub fn residual_sup(&self, disc: &Discretization) -> f64 {
        disc.sup_sampled(|e, x| {
            self.psi_star.eval_in(&disc.mesh, e, x) - self.f_star(&disc.spec, x)
        })
    }

    /// `a_h(z*, phi_i) - (psi* - f*, phi_i)_h` for every interior basis
    /// function; vanishes up to rounding.
    pub fn galerkin_defect(&self, disc: &Discretization) -> Vec<f64> {
        let az = disc.stiffness.apply(&self.z_star);
        let mpsi = disc.mass.apply(&self.psi_star);
        let lf = assemble_load(&disc.mesh, &|x| self.f_star(&disc.spec, x));
        az.iter()
            .zip(&mpsi)
            .zip(&lf)
            .map(|((a, m), l)| a - m + l)
            .collect()
    }
}

pub fn compute_star_defect(traj: &Trajectory, psi: &PsiFamily, j: usize) -> StarDefect {
    assert!(
        j >= 1 && j <= traj.steps(),
        "star defect index {j} out of range"
    );
    let combine =
        |half: &NodalField, prev_w: &NodalField, cur_v: &NodalField, prev_v: &NodalField| {
            let dv = cur_v.lincomb(0.5, prev_v, -0.5);
            half.lincomb(1.0, prev_w, -1.0).lincomb(1.0, &dv, -1.0)
        };
    StarDefect {
        j,
        z_star: combine(traj.w_half(j), traj.w_at(j - 1), &traj.v[j], &traj.v[j - 1]),
        psi_star: combine(
            psi.w_half(j),
            psi.w_at(j - 1),
            &psi.psi_v[j],
            &psi.psi_v[j - 1],
        ),
        t_prev: traj.grid.t(j - 1),
        t_half: traj.grid.t_half(j),
        t_curr: traj.grid.t(j),
    }
}

pub fn compute_star_defects(traj: &Trajectory, psi: &PsiFamily) -> Vec<StarDefect> {
    (1..=traj.steps())
        .map(|j| compute_star_defect(traj, psi, j))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_test_problem;
    use crate::timestepper::{delta_t, run, InitialApprox, TimeGrid};
    use std::sync::Arc;

    fn setup(elements: usize, steps: usize) -> (Discretization, Trajectory, PsiFamily) {
        let spec = builtin_test_problem();
        let disc = Discretization::uniform(&spec, elements).unwrap();
        let grid = TimeGrid::uniform(spec.horizon, steps).unwrap();
        let traj = run(&disc, &grid, InitialApprox::Interpolant).unwrap();
        let psi = PsiFamily::compute(&disc, &traj).unwrap();
        (disc, traj, psi)
    }

    #[test]
    fn psi_of_discrete_elliptic_solution_vanishes() {
        let spec = builtin_test_problem();
        let disc = Discretization::uniform(&spec, 20).unwrap();
        let t = 0.3;
        let y = NodalField::from_interior(&disc.stiffness.solve(&disc.source_load(t)).unwrap());
        assert!(compute_psi(&disc, &y, t).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn psi_v_is_minus_difference_quotient() {
        let (_, traj, psi) = setup(32, 16);
        for j in 1..=16 {
            let dv = delta_t(&traj.v[j], &traj.v[j - 1], traj.grid.tau(j)).scaled(-1.0);
            let scale = dv.sup_norm().max(1.0);
            assert!(psi.psi_v[j].max_abs_diff(&dv) < 1e-10 * scale);
        }
    }

    #[test]
    fn psi_w_half_step_identities() {
        let (_, traj, psi) = setup(32, 16);
        for j in 1..=16 {
            let tau = traj.grid.tau(j);
            let first = traj
                .w_at(j - 1)
                .lincomb(2.0 / tau, traj.w_half(j), -2.0 / tau);
            let second = traj.w_half(j).lincomb(2.0 / tau, traj.w_at(j), -2.0 / tau);
            assert!(psi.w_half(j).max_abs_diff(&first) < 1e-10 * first.sup_norm().max(1.0));
            assert!(psi.w_at(j).max_abs_diff(&second) < 1e-10 * second.sup_norm().max(1.0));
        }
    }

    #[test]
    fn psi_u_linear_combination() {
        let (_, _, psi) = setup(16, 8);
        for j in 0..=8 {
            let comb = psi.w_at(j).lincomb(2.0, &psi.psi_v[j], -1.0);
            assert!(psi.psi_u[j].max_abs_diff(&comb) < 1e-10 * comb.sup_norm().max(1.0));
        }
    }

    #[test]
    fn z_star_galerkin_relation() {
        let (disc, traj, psi) = setup(32, 8);
        for star in compute_star_defects(&traj, &psi) {
            let scale = disc.stiffness.norm_inf() * star.z_star.sup_norm().max(1e-300);
            let defect = star.galerkin_defect(&disc);
            let worst = defect.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
            assert!(worst <= 1e-10 * scale.max(1e-12), "j={} {worst}", star.j);
        }
    }

    #[test]
    fn f_star_vanishes_for_linear_in_time_source() {
        let mut spec = builtin_test_problem();
        spec.source = Arc::new(|x, t| 3.0 * t - x + 1.0);
        let disc = Discretization::uniform(&spec, 8).unwrap();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let traj = run(&disc, &grid, InitialApprox::Interpolant).unwrap();
        let psi = PsiFamily::compute(&disc, &traj).unwrap();
        let star = compute_star_defect(&traj, &psi, 2);
        for x in [-1.0, -0.3, 0.5, 1.0] {
            assert!(star.f_star(&spec, x).abs() < 1e-14);
        }
    }

    #[test]
    fn steady_state_has_no_defect() {
        let mut spec = builtin_test_problem();
        spec.source = Arc::new(|x, _| 1.0 + x * x);
        let mesh_disc = Discretization::uniform(&spec, 16).unwrap();
        let y = mesh_disc
            .stiffness
            .solve(&mesh_disc.source_load(0.0))
            .unwrap();
        let y = NodalField::from_interior(&y);
        let yy = y.clone();
        let mesh = mesh_disc.mesh.clone();
        spec.initial = Arc::new(move |x| yy.eval(&mesh, x));
        let disc = Discretization::uniform(&spec, 16).unwrap();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let traj = run(&disc, &grid, InitialApprox::Interpolant).unwrap();
        let psi = PsiFamily::compute(&disc, &traj).unwrap();
        for j in 1..=4 {
            assert!(traj.v[j].max_abs_diff(&y) < 1e-12);
            let star = compute_star_defect(&traj, &psi, j);
            assert!(star.z_star.sup_norm() < 1e-12);
        }
    }
}
