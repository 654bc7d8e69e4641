//! Maximum-norm a posteriori estimators for the discrete elliptic problem
//! `a_h(y_h, chi) = (g, chi)_h`.
//!
//! An estimator returns a computable `eta(y_h, g) >= |y - y_h|_inf`, where
//! `y` solves the continuous problem `-eps y'' + r y = g` with homogeneous
//! Dirichlet data. Estimators are pluggable through [`EllipticEstimator`];
//! the default is [`ResidualEstimator1d`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem1d::{Discretization, NodalField};
use crate::reconstruction::{PsiFamily, StarDefect};
use crate::timestepper::{delta_t, Trajectory};

/// Load `g = pointwise + discrete` of an elliptic problem.
pub struct EllipticLoad<'a> {
    pub pointwise: &'a (dyn Fn(f64) -> f64 + Sync),
    pub discrete: Option<&'a NodalField>,
}

impl<'a> EllipticLoad<'a> {
    pub fn eval_in(&self, disc: &Discretization, e: usize, x: f64) -> f64 {
        let p = (self.pointwise)(x);
        match self.discrete {
            Some(field) => p + field.eval_in(&disc.mesh, e, x),
            None => p,
        }
    }
}

pub trait EllipticEstimator: Send + Sync {
    fn name(&self) -> &str;

    /// Constants entering the estimate, for run metadata.
    fn constants(&self, disc: &Discretization) -> Vec<(&'static str, f64)>;

    fn estimate(&self, disc: &Discretization, y_h: &NodalField, load: &EllipticLoad<'_>) -> f64;
}

/// Element-residual bound
///
/// ```text
///   eta = C / eps * max_k h_k^2 |g - r y_h|_inf,k
/// ```
///
/// On each element `y_h'' = 0`, so `g - r y_h` is the whole residual. With
/// Galerkin orthogonality the error at `x` is the residual tested against
/// `G_x - I_h G_x`, where `G_x` is the Green's function of
/// `-eps d^2/dx^2 + r`. Its second derivative has L1 norm
/// `(1 + int r G_x) / eps <= 2 / eps`, and the L1 interpolation error on an
/// element is at most `h^2 / 8` times that. Hence `C = 1/8` for `r = 0` and
/// `C = 1/4` otherwise. Quadrature perturbations of `a_h` and `(., .)_h`
/// are not included.
#[derive(Debug, Clone, Copy, Default)]
pub struct ResidualEstimator1d;

impl ResidualEstimator1d {
    pub const NAME: &'static str = "residual-1d";

    pub fn constant(disc: &Discretization) -> f64 {
        let c = if disc.spec.reaction_vanishes() {
            0.125
        } else {
            0.25
        };
        c / disc.spec.diffusion
    }
}

impl EllipticEstimator for ResidualEstimator1d {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn constants(&self, disc: &Discretization) -> Vec<(&'static str, f64)> {
        vec![("residual_constant", Self::constant(disc))]
    }

    fn estimate(&self, disc: &Discretization, y_h: &NodalField, load: &EllipticLoad<'_>) -> f64 {
        let mesh = &disc.mesh;
        let r = &disc.spec.reaction;
        let mut worst = 0.0_f64;
        for e in 0..mesh.n_elements() {
            let h = mesh.width(e);
            let mut res = 0.0_f64;
            for x in mesh.element_samples(e, disc.samples_per_element) {
                let g = load.eval_in(disc, e, x);
                res = res.max((g - r(x) * y_h.eval_in(mesh, e, x)).abs());
            }
            worst = worst.max(h * h * res);
        }
        Self::constant(disc) * worst
    }
}

#[derive(Clone)]
pub struct EllipticEstimatorHandle(Arc<dyn EllipticEstimator>);

impl fmt::Debug for EllipticEstimatorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EllipticEstimatorHandle({})", self.0.name())
    }
}

impl Default for EllipticEstimatorHandle {
    fn default() -> Self {
        EllipticEstimatorHandle(Arc::new(ResidualEstimator1d))
    }
}

impl EllipticEstimatorHandle {
    pub fn new(estimator: impl EllipticEstimator + 'static) -> Self {
        EllipticEstimatorHandle(Arc::new(estimator))
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            ResidualEstimator1d::NAME => Ok(Self::default()),
            _ => Err(Error::Unknown {
                what: "elliptic estimator",
                name: name.to_owned(),
            }),
        }
    }

    pub fn name(&self) -> &str {
        self.0.name()
    }

    pub fn constants(&self, disc: &Discretization) -> Vec<(&'static str, f64)> {
        self.0.constants(disc)
    }

    pub fn eval(&self, disc: &Discretization, y_h: &NodalField, load: &EllipticLoad<'_>) -> f64 {
        let eta = self.0.estimate(disc, y_h, load);
        assert!(
            eta.is_finite() && eta >= 0.0,
            "estimator {} returned {eta}",
            self.name()
        );
        eta
    }
}

/// `eta(u^j, f^j + psi_u^j)`
pub fn eta_ell(
    j: usize,
    traj: &Trajectory,
    psi: &PsiFamily,
    estimator: &EllipticEstimatorHandle,
    disc: &Discretization,
) -> f64 {
    let t = traj.grid.t(j);
    let f = &disc.spec.source;
    let pointwise = |x: f64| f(x, t);
    estimator.eval(
        disc,
        &traj.u[j],
        &EllipticLoad {
            pointwise: &pointwise,
            discrete: Some(&psi.psi_u[j]),
        },
    )
}

/// `eta(delta_t u^j, delta_t (f + psi_u)^j)`, `j >= 1`.
pub fn eta_ell_delta(
    j: usize,
    traj: &Trajectory,
    psi: &PsiFamily,
    estimator: &EllipticEstimatorHandle,
    disc: &Discretization,
) -> f64 {
    let grid = &traj.grid;
    let (t0, t1, tau) = (grid.t(j - 1), grid.t(j), grid.tau(j));
    let f = &disc.spec.source;
    let pointwise = |x: f64| (f(x, t1) - f(x, t0)) / tau;
    let du = delta_t(&traj.u[j], &traj.u[j - 1], tau);
    let dpsi = delta_t(&psi.psi_u[j], &psi.psi_u[j - 1], tau);
    estimator.eval(
        disc,
        &du,
        &EllipticLoad {
            pointwise: &pointwise,
            discrete: Some(&dpsi),
        },
    )
}

/// `eta(z*, psi* - f*)`
pub fn eta_star(
    star: &StarDefect,
    estimator: &EllipticEstimatorHandle,
    disc: &Discretization,
) -> f64 {
    let pointwise = |x: f64| -star.f_star(&disc.spec, x);
    estimator.eval(
        disc,
        &star.z_star,
        &EllipticLoad {
            pointwise: &pointwise,
            discrete: Some(&star.psi_star),
        },
    )
}
