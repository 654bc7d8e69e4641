//! Extrapolated backward Euler with P1 finite elements for 1D linear
//! reaction-diffusion problems, and a fully computable a posteriori bound
//! for the maximum-norm error at the final time.
//!
//! The usual pipeline:
//!
//! ```no_run
//! use parabolic_apost::{estimate, problem, EstimateOptions};
//!
//! let spec = problem::builtin_test_problem();
//! let run = estimate(&spec, 32, 16, &EstimateOptions::default()).unwrap();
//! println!("bound {:.3e}", run.breakdown.total);
//! ```

pub mod elliptic_estimator;
pub mod error;
pub mod experiment;
pub mod fem1d;
pub mod parabolic_estimator;
pub mod problem;
pub mod reconstruction;
pub mod reference_oracle;
pub mod timestepper;
pub mod verify;

pub use error::{Error, Result};

use elliptic_estimator::EllipticEstimatorHandle;
use fem1d::Discretization;
use parabolic_estimator::{assemble_total, EstimatorBreakdown, EtaFMode};
use problem::ProblemSpec;
use reconstruction::{compute_star_defects, PsiFamily, StarDefect};
use timestepper::{run, InitialApprox, TimeGrid, Trajectory};

/// Choice of the split index `K` in `0..M`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KPolicy {
    /// `K = M - 1`
    #[default]
    Last,
    Fixed(usize),
    /// Minimise the bound over all `K`.
    Sweep,
}

#[derive(Debug, Clone, Default)]
pub struct EstimateOptions {
    pub estimator: EllipticEstimatorHandle,
    pub eta_f_mode: EtaFMode,
    pub k_policy: KPolicy,
    pub initial: InitialApprox,
    /// Samples per element for sampled maximum norms; `None` keeps the default.
    pub samples_per_element: Option<usize>,
}

/// Everything produced by one solve-and-estimate pass.
#[derive(Debug, Clone)]
pub struct EstimatedRun {
    pub disc: Discretization,
    pub trajectory: Trajectory,
    pub psi: PsiFamily,
    pub stars: Vec<StarDefect>,
    pub breakdown: EstimatorBreakdown,
}

/// Runs the scheme on a uniform mesh and uniform time grid and evaluates
/// the error bound.
pub fn estimate(
    spec: &ProblemSpec,
    elements: usize,
    steps: usize,
    options: &EstimateOptions,
) -> Result<EstimatedRun> {
    let mut disc = Discretization::uniform(spec, elements)?;
    if let Some(n_s) = options.samples_per_element {
        disc = disc.with_samples(n_s);
    }
    let grid = TimeGrid::uniform(spec.horizon, steps)?;
    estimate_on(disc, &grid, options)
}

pub fn estimate_on(
    disc: Discretization,
    grid: &TimeGrid,
    options: &EstimateOptions,
) -> Result<EstimatedRun> {
    let trajectory = run(&disc, grid, options.initial)?;
    let psi = PsiFamily::compute(&disc, &trajectory)?;
    let stars = compute_star_defects(&trajectory, &psi);
    let m = grid.steps();
    let k = match options.k_policy {
        KPolicy::Last | KPolicy::Sweep => m - 1,
        KPolicy::Fixed(k) => k,
    };
    let mut breakdown = assemble_total(
        &disc,
        &trajectory,
        &psi,
        &stars,
        &options.estimator,
        k,
        options.eta_f_mode,
    )?;
    if options.k_policy == KPolicy::Sweep {
        breakdown = breakdown.best_split(grid)?;
    }
    Ok(EstimatedRun {
        disc,
        trajectory,
        psi,
        stars,
        breakdown,
    })
}
