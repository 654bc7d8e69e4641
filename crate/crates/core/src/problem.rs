//! Continuous problem data.
//!
//! A problem is the 1D reaction-diffusion initial-boundary-value problem
//!
//! ```text
//!   u_t - eps u_xx + r(x) u = f(x, t)   in (x_left, x_right) x (0, T]
//!   u(x, 0) = u0(x),   u = 0 on the boundary
//! ```
//!
//! together with the constants bounding the L1 norms of the Green's function
//! of the parabolic operator and of its time derivative:
//! `|G(t)|_1 <= kappa0 e^{-gamma t}` and
//! `|dG/dt(t)|_1 <= (kappa1 / t + kappa1') e^{-gamma t}`.
//!
//! Coefficients are plain closures. Problems built from a [`ProblemConfig`]
//! additionally carry a fingerprint so reference solutions can be cached.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Name under which the built-in reaction-diffusion benchmark is registered.
pub const BUILTIN_TEST_PROBLEM: &str = "paper-sect4";

/// Number of sample intervals used by [`ProblemSpec::validate`].
pub const VALIDATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreensBounds {
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa1_prime: f64,
    pub gamma: f64,
}

impl GreensBounds {
    pub fn new(kappa0: f64, kappa1: f64, kappa1_prime: f64, gamma: f64) -> Result<Self> {
        let bounds = GreensBounds {
            kappa0,
            kappa1,
            kappa1_prime,
            gamma,
        };
        bounds.check()?;
        Ok(bounds)
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("kappa0", self.kappa0),
            ("kappa1", self.kappa1),
            ("kappa1_prime", self.kappa1_prime),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Greens(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    /// `phi0(t) = kappa0 e^{-gamma t}`
    pub fn phi0(&self, t: f64) -> f64 {
        self.kappa0 * (-self.gamma * t).exp()
    }

    /// `phi1(t) = (kappa1 / t + kappa1') e^{-gamma t}`
    pub fn phi1(&self, t: f64) -> f64 {
        (self.kappa1 / t + self.kappa1_prime) * (-self.gamma * t).exp()
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub x_left: f64,
    pub x_right: f64,
    pub diffusion: f64,
    pub reaction: SpaceFn,
    pub source: SpaceTimeFn,
    pub initial: SpaceFn,
    pub horizon: f64,
    pub greens: GreensBounds,
    fingerprint: Option<Fingerprint>,
}

/// Config text plus the data it was built into; stale once any of the
/// functions or scalars that determine the solution are replaced.
#[derive(Clone)]
struct Fingerprint {
    text: String,
    handles: [usize; 3],
    scalars: [u64; 4],
}

impl ProblemSpec {
    fn solution_data(&self) -> ([usize; 3], [u64; 4]) {
        (
            [
                Arc::as_ptr(&self.reaction) as *const () as usize,
                Arc::as_ptr(&self.source) as *const () as usize,
                Arc::as_ptr(&self.initial) as *const () as usize,
            ],
            [self.x_left, self.x_right, self.diffusion, self.horizon].map(f64::to_bits),
        )
    }
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &(self.x_left, self.x_right))
            .field("diffusion", &self.diffusion)
            .field("horizon", &self.horizon)
            .field("greens", &self.greens)
            .finish_non_exhaustive()
    }
}

/// First invariant violation found by [`ProblemSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InitialNonzeroAtBoundary { x: f64, value: f64 },
    NegativeReaction { x: f64, value: f64 },
    NonFinite { what: &'static str, x: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InitialNonzeroAtBoundary { x, value } => {
                write!(
                    f,
                    "initial data u0({x}) = {value} does not vanish on the boundary"
                )
            }
            Violation::NegativeReaction { x, value } => {
                write!(f, "reaction coefficient r({x}) = {value} is negative")
            }
            Violation::NonFinite { what, x } => write!(f, "{what} is not finite at x = {x}"),
        }
    }
}

impl ProblemSpec {
    /// Builds a problem from closures. Such problems have no fingerprint and
    /// are never served from the reference cache.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        (x_left, x_right): (f64, f64),
        diffusion: f64,
        reaction: SpaceFn,
        source: SpaceTimeFn,
        initial: SpaceFn,
        horizon: f64,
        greens: GreensBounds,
    ) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite() && x_left < x_right) {
            return Err(Error::Problem(format!(
                "domain ({x_left}, {x_right}) must be a finite interval with x_left < x_right"
            )));
        }
        if !(diffusion.is_finite() && diffusion > 0.0) {
            return Err(Error::Problem(format!("diffusion {diffusion} must be > 0")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Problem(format!("horizon {horizon} must be > 0")));
        }
        greens.check()?;
        Ok(ProblemSpec {
            name: name.into(),
            x_left,
            x_right,
            diffusion,
            reaction,
            source,
            initial,
            horizon,
            greens,
            fingerprint: None,
        })
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    /// Stable identifier of the solution for config-built problems. `None`
    /// for closure-built problems and for config-built ones whose data has
    /// since been replaced. Green's bounds do not affect the solution and
    /// are not part of it.
    pub fn fingerprint(&self) -> Option<&str> {
        let fp = self.fingerprint.as_ref()?;
        let (handles, scalars) = self.solution_data();
        (fp.handles == handles && fp.scalars == scalars).then_some(fp.text.as_str())
    }

    pub fn with_greens(mut self, greens: GreensBounds) -> Self {
        self.greens = greens;
        self
    }

    /// Checks the data invariants on a grid of [`VALIDATION_SAMPLES`] + 1
    /// points and reports the first violation.
    pub fn validate(&self) -> std::result::Result<(), Violation> {
        let scale = (0..=VALIDATION_SAMPLES)
            .map(|i| (self.initial)(self.sample_point(i)).abs())
            .fold(1.0_f64, f64::max);
        for x in [self.x_left, self.x_right] {
            let value = (self.initial)(x);
            if !value.is_finite() {
                return Err(Violation::NonFinite {
                    what: "initial data",
                    x,
                });
            }
            if value.abs() > 1e-12 * scale {
                return Err(Violation::InitialNonzeroAtBoundary { x, value });
            }
        }
        for i in 0..=VALIDATION_SAMPLES {
            let x = self.sample_point(i);
            let value = (self.reaction)(x);
            if !value.is_finite() {
                return Err(Violation::NonFinite {
                    what: "reaction",
                    x,
                });
            }
            if value < 0.0 {
                return Err(Violation::NegativeReaction { x, value });
            }
        }
        Ok(())
    }

    fn sample_point(&self, i: usize) -> f64 {
        if i == VALIDATION_SAMPLES {
            self.x_right
        } else {
            self.x_left + self.length() * i as f64 / VALIDATION_SAMPLES as f64
        }
    }

    /// Whether r vanishes on the validation grid.
    pub fn reaction_vanishes(&self) -> bool {
        (0..=VALIDATION_SAMPLES).all(|i| (self.reaction)(self.sample_point(i)) == 0.0)
    }
}

/// The built-in benchmark: `u_t - u_xx + (5x+6) u = e^{-4t} - cos(x+t)^4` on
/// `(-1, 1) x (0, 1]`, `u0 = sin(pi (1+x) / 2)`, with Green's bounds
/// `kappa0 = 1`, `kappa1 = 3 / 2^{3/2}`, `kappa1' = 0`, `gamma = 1/2`.
pub fn builtin_test_problem() -> ProblemSpec {
    ProblemConfig::builtin_test_problem()
        .build()
        .expect("built-in problem is valid")
}

/// Scalar function of `x`, selected by name in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceFnConfig {
    Zero,
    Constant {
        value: f64,
    },
    /// `a x + b`
    Affine {
        a: f64,
        b: f64,
    },
    /// `amplitude * sin(pi (x - x_left) / (x_right - x_left))`
    SineHump {
        amplitude: f64,
    },
    /// `sum_k coeffs[k] x^k`
    Polynomial {
        coeffs: Vec<f64>,
    },
}

impl SpaceFnConfig {
    fn build(&self, x_left: f64, x_right: f64) -> SpaceFn {
        match self.clone() {
            SpaceFnConfig::Zero => Arc::new(|_| 0.0),
            SpaceFnConfig::Constant { value } => Arc::new(move |_| value),
            SpaceFnConfig::Affine { a, b } => Arc::new(move |x| a * x + b),
            SpaceFnConfig::SineHump { amplitude } => {
                let len = x_right - x_left;
                Arc::new(move |x| amplitude * (PI * (x - x_left) / len).sin())
            }
            SpaceFnConfig::Polynomial { coeffs } => Arc::new(move |x| horner(&coeffs, x)),
        }
    }
}

/// Source term `f(x, t)`, selected by name in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceConfig {
    Zero,
    Constant {
        value: f64,
    },
    /// `e^{-4t} - cos(x+t)^4`
    ExpMinusCos4,
    /// `sum_k coeffs[k] t^k`, constant in space
    TimePolynomial {
        coeffs: Vec<f64>,
    },
    /// Source matching the exact solution
    /// `u = amplitude e^{-rate t} sin(pi (x - x_left) / L)` for the problem's
    /// diffusion and reaction.
    ManufacturedSineDecay {
        amplitude: f64,
        rate: f64,
    },
}

impl SourceConfig {
    fn build(&self, cfg: &ProblemConfig, reaction: &SpaceFn) -> SpaceTimeFn {
        match self.clone() {
            SourceConfig::Zero => Arc::new(|_, _| 0.0),
            SourceConfig::Constant { value } => Arc::new(move |_, _| value),
            SourceConfig::ExpMinusCos4 => Arc::new(|x, t| (-4.0 * t).exp() - (x + t).cos().powi(4)),
            SourceConfig::TimePolynomial { coeffs } => Arc::new(move |_, t| horner(&coeffs, t)),
            SourceConfig::ManufacturedSineDecay { amplitude, rate } => {
                let [x_left, x_right] = cfg.domain;
                let k = PI / (x_right - x_left);
                let eps = cfg.diffusion;
                let r = reaction.clone();
                Arc::new(move |x, t| {
                    let u = amplitude * (-rate * t).exp() * (k * (x - x_left)).sin();
                    u * (-rate + eps * k * k + r(x))
                })
            }
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// JSON description of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_problem_name")]
    pub name: String,
    pub domain: [f64; 2],
    #[serde(default = "one")]
    pub diffusion: f64,
    pub reaction: SpaceFnConfig,
    pub source: SourceConfig,
    pub initial: SpaceFnConfig,
    pub horizon: f64,
    pub greens: GreensBounds,
}

fn default_problem_name() -> String {
    "custom".to_owned()
}

fn one() -> f64 {
    1.0
}

impl ProblemConfig {
    pub fn builtin_test_problem() -> Self {
        ProblemConfig {
            name: BUILTIN_TEST_PROBLEM.to_owned(),
            domain: [-1.0, 1.0],
            diffusion: 1.0,
            reaction: SpaceFnConfig::Affine { a: 5.0, b: 6.0 },
            source: SourceConfig::ExpMinusCos4,
            initial: SpaceFnConfig::SineHump { amplitude: 1.0 },
            horizon: 1.0,
            greens: GreensBounds {
                kappa0: 1.0,
                kappa1: 3.0 / 2f64.powf(1.5),
                kappa1_prime: 0.0,
                gamma: 0.5,
            },
        }
    }

    /// Exact solution `e^{-t} sin(pi (1+x)/2)` on the built-in problem's
    /// domain, operator and Green's bounds.
    pub fn manufactured_sine_decay() -> Self {
        ProblemConfig {
            name: "manufactured-sine-decay".to_owned(),
            source: SourceConfig::ManufacturedSineDecay {
                amplitude: 1.0,
                rate: 1.0,
            },
            ..Self::builtin_test_problem()
        }
    }

    /// Closed-form solution when the source was manufactured from one.
    pub fn exact_solution(&self) -> Option<SpaceTimeFn> {
        let SourceConfig::ManufacturedSineDecay { amplitude, rate } = self.source else {
            return None;
        };
        let [x_left, x_right] = self.domain;
        let k = PI / (x_right - x_left);
        Some(Arc::new(move |x, t| {
            amplitude * (-rate * t).exp() * (k * (x - x_left)).sin()
        }))
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            BUILTIN_TEST_PROBLEM => Ok(Self::builtin_test_problem()),
            "manufactured-sine-decay" => Ok(Self::manufactured_sine_decay()),
            _ => Err(Error::Unknown {
                what: "problem",
                name: name.to_owned(),
            }),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        let [x_left, x_right] = self.domain;
        let reaction = self.reaction.build(x_left, x_right);
        let source = self.source.build(self, &reaction);
        let initial = self.initial.build(x_left, x_right);
        let mut spec = ProblemSpec::new(
            self.name.clone(),
            (x_left, x_right),
            self.diffusion,
            reaction,
            source,
            initial,
            self.horizon,
            self.greens,
        )?;
        let mut text = serde_json::to_value(self)?;
        if let serde_json::Value::Object(map) = &mut text {
            map.remove("greens");
            map.remove("name");
        }
        let (handles, scalars) = spec.solution_data();
        spec.fingerprint = Some(Fingerprint {
            text: text.to_string(),
            handles,
            scalars,
        });
        Ok(spec)
    }
}

/// Resolves a registered problem name or a path to a JSON problem file.
pub fn load_problem(name_or_path: &str) -> Result<ProblemSpec> {
    match ProblemConfig::by_name(name_or_path) {
        Ok(cfg) => cfg.build(),
        Err(unknown) => {
            let path = Path::new(name_or_path);
            if path.exists() {
                ProblemConfig::load(path)?.build()
            } else {
                Err(unknown)
            }
        }
    }
}
