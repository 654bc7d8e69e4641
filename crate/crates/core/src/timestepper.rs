//! Backward Euler with one full step, two half steps and extrapolation.
//!
//! For every step `j` three sequences are advanced from the same initial
//! field: `v` by one implicit Euler step of size `tau_j`, `w` by two steps of
//! size `tau_j / 2` (source at `t_{j-1/2}` and then at `t_j`), and the
//! extrapolated `u^j = 2 w^j - v^j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem1d::{Discretization, NodalField, TriDiagonal};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::TimeGrid("need at least one step".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::TimeGrid(format!(
                "first time is {}, expected 0",
                times[0]
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::TimeGrid(format!("t[{i}] is not finite")));
        }
        if let Some(j) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::TimeGrid(format!(
                "times must be strictly increasing (t[{j}] = {}, t[{}] = {})",
                times[j],
                j + 1,
                times[j + 1]
            )));
        }
        Ok(TimeGrid { times })
    }

    /// `steps` equal steps on `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::TimeGrid("need at least one step".into()));
        }
        let tau = horizon / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|j| tau * j as f64).collect();
        times[steps] = horizon;
        Self::new(times)
    }

    /// Steps of size `tau`; the last step is stretched or shrunk so that the
    /// grid ends exactly at `horizon`.
    pub fn with_step(horizon: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::TimeGrid(format!("step {tau} must be > 0")));
        }
        let steps = ((horizon / tau) - 1e-9).ceil().max(1.0) as usize;
        let mut times: Vec<f64> = (0..steps).map(|j| tau * j as f64).collect();
        times.push(horizon);
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of steps `M`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t(&self, j: usize) -> f64 {
        self.times[j]
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.steps()]
    }

    /// `tau_j = t_j - t_{j-1}` for `j >= 1`.
    pub fn tau(&self, j: usize) -> f64 {
        self.times[j] - self.times[j - 1]
    }

    /// `t_{j-1/2} = t_j - tau_j / 2`
    pub fn t_half(&self, j: usize) -> f64 {
        self.times[j] - 0.5 * self.tau(j)
    }

    pub fn max_tau(&self) -> f64 {
        (1..=self.steps()).map(|j| self.tau(j)).fold(0.0, f64::max)
    }
}

/// How the discrete initial field is obtained from `u0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialApprox {
    #[default]
    Interpolant,
    /// Discrete L2 projection `(u_h^0, chi)_h = (u0, chi)_h`.
    L2Projection,
}

/// Slot of `w^j` in [`Trajectory::w`].
pub const fn w_slot(j: usize) -> usize {
    2 * j
}

/// Slot of `w^{j-1/2}` in [`Trajectory::w`], `j >= 1`.
pub const fn w_half_slot(j: usize) -> usize {
    2 * j - 1
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// One-step solutions `v^0..v^M`.
    pub v: Vec<NodalField>,
    /// Two-step solutions; see [`w_slot`] and [`w_half_slot`].
    pub w: Vec<NodalField>,
    /// Extrapolated solutions `u^0..u^M`.
    pub u: Vec<NodalField>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn w_at(&self, j: usize) -> &NodalField {
        &self.w[w_slot(j)]
    }

    pub fn w_half(&self, j: usize) -> &NodalField {
        &self.w[w_half_slot(j)]
    }

    pub fn final_field(&self) -> &NodalField {
        &self.u[self.steps()]
    }
}

pub fn initial_field(disc: &Discretization, approx: InitialApprox) -> Result<NodalField> {
    let u0 = &disc.spec.initial;
    match approx {
        InitialApprox::Interpolant => {
            let mut field = NodalField::interpolate(&disc.mesh, |x| u0(x));
            // members of V_h vanish on the boundary
            let n = field.len();
            field.values[0] = 0.0;
            field.values[n - 1] = 0.0;
            Ok(field)
        }
        InitialApprox::L2Projection => {
            let rhs = crate::fem1d::assemble_load(&disc.mesh, u0.as_ref());
            Ok(NodalField::from_interior(&disc.mass.solve(&rhs)?))
        }
    }
}

/// Solves `(M + tau A) x = M field + tau (f(., t_from + tau), phi)_h`.
pub fn backward_euler_step(
    disc: &Discretization,
    field: &NodalField,
    t_from: f64,
    tau: f64,
) -> Result<NodalField> {
    let matrix = disc.implicit_matrix(tau)?;
    step_with(disc, &matrix, field, t_from + tau, tau)
}

fn step_with(
    disc: &Discretization,
    matrix: &TriDiagonal,
    field: &NodalField,
    t_new: f64,
    tau: f64,
) -> Result<NodalField> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::TimeGrid(format!("step {tau} must be > 0")));
    }
    if field.len() != disc.mesh.n_nodes() {
        return Err(Error::Dimension(format!(
            "field has {} values, mesh has {} nodes",
            field.len(),
            disc.mesh.n_nodes()
        )));
    }
    let mut rhs = disc.mass.apply(field);
    for (r, l) in rhs.iter_mut().zip(disc.source_load(t_new)) {
        *r += tau * l;
    }
    Ok(NodalField::from_interior(&matrix.solve(&rhs)?))
}

/// Caches `M + tau A` for the last step size seen.
struct MatrixCache<'a> {
    disc: &'a Discretization,
    tau: f64,
    matrix: Option<TriDiagonal>,
}

impl<'a> MatrixCache<'a> {
    fn new(disc: &'a Discretization) -> Self {
        MatrixCache {
            disc,
            tau: f64::NAN,
            matrix: None,
        }
    }

    fn get(&mut self, tau: f64) -> Result<&TriDiagonal> {
        if self.matrix.is_none() || self.tau != tau {
            self.matrix = Some(self.disc.implicit_matrix(tau)?);
            self.tau = tau;
        }
        Ok(self.matrix.as_ref().expect("just filled"))
    }
}

pub fn run(disc: &Discretization, grid: &TimeGrid, approx: InitialApprox) -> Result<Trajectory> {
    let u0 = initial_field(disc, approx)?;
    let m = grid.steps();
    let mut v = Vec::with_capacity(m + 1);
    let mut w = Vec::with_capacity(2 * m + 1);
    let mut u = Vec::with_capacity(m + 1);
    v.push(u0.clone());
    w.push(u0.clone());
    u.push(u0);

    let mut full = MatrixCache::new(disc);
    let mut half = MatrixCache::new(disc);
    for j in 1..=m {
        let tau = grid.tau(j);
        let wrap = |source| Error::Step {
            step: j,
            source: Box::new(source),
        };
        let vj = step_with(
            disc,
            full.get(tau).map_err(wrap)?,
            &v[j - 1],
            grid.t(j),
            tau,
        )
        .map_err(wrap)?;
        let half_matrix = half.get(0.5 * tau).map_err(wrap)?;
        let w_mid = step_with(
            disc,
            half_matrix,
            &w[w_slot(j - 1)],
            grid.t_half(j),
            0.5 * tau,
        )
        .map_err(wrap)?;
        let wj = step_with(disc, half_matrix, &w_mid, grid.t(j), 0.5 * tau).map_err(wrap)?;
        u.push(wj.lincomb(2.0, &vj, -1.0));
        v.push(vj);
        w.push(w_mid);
        w.push(wj);
    }
    Ok(Trajectory {
        grid: grid.clone(),
        v,
        w,
        u,
    })
}

/// `(current - previous) / tau`
pub fn delta_t(current: &NodalField, previous: &NodalField, tau: f64) -> NodalField {
    current.lincomb(1.0 / tau, previous, -1.0 / tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_test_problem;
    use std::sync::Arc;

    #[test]
    fn grid_construction() {
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        assert_eq!(g.steps(), 16);
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.t_half(1), 1.0 / 32.0);
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::new(vec![0.1, 0.5]).is_err());
        let g = TimeGrid::with_step(1.0, 0.3).unwrap();
        assert_eq!(g.times(), &[0.0, 0.3, 0.6, 0.8999999999999999, 1.0][..]);
        let g = TimeGrid::with_step(1.0, 0.25).unwrap();
        assert_eq!(g.steps(), 4);
        assert_eq!(g.horizon(), 1.0);
    }

    #[test]
    fn initial_interpolant_hits_nodes() {
        let spec = builtin_test_problem();
        let disc = Discretization::uniform(&spec, 8).unwrap();
        let u0 = initial_field(&disc, InitialApprox::Interpolant).unwrap();
        assert_eq!(u0.values[4], 1.0);
        assert!(u0.vanishes_on_boundary());
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let mut spec = builtin_test_problem();
        spec.initial = Arc::new(|_| 0.0);
        spec.source = Arc::new(|_, _| 0.0);
        let disc = Discretization::uniform(&spec, 8).unwrap();
        let traj = run(
            &disc,
            &TimeGrid::uniform(1.0, 4).unwrap(),
            InitialApprox::Interpolant,
        )
        .unwrap();
        for f in traj.v.iter().chain(&traj.w).chain(&traj.u) {
            assert_eq!(f.sup_norm(), 0.0);
        }
        let z = NodalField::zeros(&disc.mesh);
        assert_eq!(
            backward_euler_step(&disc, &z, 0.0, 0.1).unwrap().sup_norm(),
            0.0
        );
    }

    #[test]
    fn extrapolation_identity_is_exact() {
        let spec = builtin_test_problem();
        let disc = Discretization::uniform(&spec, 16).unwrap();
        let traj = run(
            &disc,
            &TimeGrid::uniform(1.0, 8).unwrap(),
            InitialApprox::Interpolant,
        )
        .unwrap();
        assert_eq!(traj.w.len(), 17);
        for j in 1..=8 {
            let expect = traj.w_at(j).lincomb(2.0, &traj.v[j], -1.0);
            assert_eq!(traj.u[j], expect);
            assert!(traj.u[j].vanishes_on_boundary());
        }
    }

    #[test]
    fn scalar_ode_analogue() {
        // two elements on (0, 2), one interior node; constant reaction and source
        let (r, f, y, tau) = (3.0, 2.0, 0.7, 0.1);
        let mut spec = builtin_test_problem();
        spec.x_left = 0.0;
        spec.x_right = 2.0;
        spec.reaction = Arc::new(move |_| r);
        spec.source = Arc::new(move |_, _| f);
        spec.diffusion = 1.0;
        let disc = Discretization::uniform(&spec, 2).unwrap();
        // single unknown: m = 2/3, a = 2 + 2r/3, load = f
        let m = 2.0 / 3.0;
        let a = 2.0 + 2.0 * r / 3.0;
        let x = (m * y + tau * f) / (m + tau * a);
        let field = NodalField::from_interior(&[y]);
        let got = backward_euler_step(&disc, &field, 0.0, tau).unwrap();
        assert!((got.values[1] - x).abs() < 1e-14);
    }

    #[test]
    fn delta_t_examples() {
        let a = NodalField::from_values(vec![0.0, 1.0, 2.0, 0.0]);
        assert_eq!(delta_t(&a, &a, 0.5).sup_norm(), 0.0);
        let c = NodalField::from_values(vec![0.0, 3.0, -1.0, 0.0]);
        let tau = 0.25;
        let b = a.lincomb(1.0, &c, tau);
        let d = delta_t(&b, &a, tau);
        assert!(d.max_abs_diff(&c) < 1e-14);
    }
}
