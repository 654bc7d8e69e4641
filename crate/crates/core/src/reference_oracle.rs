//! High-accuracy reference solution at the final time.
//!
//! Crank-Nicolson in time on a fine P1 mesh, started with four implicit
//! Euler half steps to damp the stiff modes excited by incompatible data.
//! Two runs with step ratio 2 are combined to cancel the `tau^2` term, and
//! the same is done in space with mesh ratio 2 to cancel the `h^2` term.
//! The whole construction is repeated once with everything refined by 2;
//! the difference between the two levels is the reported accuracy.
//!
//! Results can be cached on disk. The file layout is little-endian:
//!
//! ```text
//!   magic  b"PAREFSOL"   8 bytes
//!   version u32          = 1
//!   reserved u32         = 0
//!   n_nodes u64
//!   x_left f64, x_right f64, accuracy f64
//!   values  f64 x n_nodes
//! ```

use std::io::Read;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem1d::{Discretization, NodalField, SpatialMesh};
use crate::problem::ProblemSpec;

/// Environment variable naming the reference cache directory.
pub const CACHE_ENV: &str = "PARABOLIC_APOST_CACHE";

const MAGIC: &[u8; 8] = b"PAREFSOL";
const FORMAT_VERSION: u32 = 1;
// bump when the integrator changes so stale cache files are ignored
const ALGORITHM_VERSION: u32 = 1;

/// Smallest tolerance the oracle accepts.
pub const MIN_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct ReferenceOptions {
    /// Spatial elements of the coarsest reference level.
    pub elements: usize,
    /// Crank-Nicolson steps per unit time on the coarsest level.
    pub steps_per_unit_time: usize,
    /// Refinement levels tried before giving up.
    pub max_levels: usize,
    pub cache_dir: Option<PathBuf>,
}

impl ReferenceOptions {
    /// Reference mesh 16 times finer than the finest production mesh.
    pub fn for_production_mesh(finest_elements: usize) -> Self {
        ReferenceOptions {
            elements: 16 * finest_elements,
            steps_per_unit_time: 256,
            max_levels: 3,
            cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
        }
    }

    pub fn with_cache_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.cache_dir = dir;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub mesh: SpatialMesh,
    pub values: NodalField,
    /// Sup-norm difference to the next coarser level.
    pub accuracy: f64,
}

impl ReferenceSolution {
    pub fn eval(&self, x: f64) -> f64 {
        self.values.eval(&self.mesh, x)
    }
}

struct CnRunner<'a> {
    disc: &'a Discretization,
}

impl CnRunner<'_> {
    /// Crank-Nicolson with `steps` equal steps; the first two are replaced by
    /// four implicit Euler steps of half the size.
    fn solve(&self, steps: usize) -> Result<Vec<f64>> {
        let disc = self.disc;
        let horizon = disc.spec.horizon;
        let tau = horizon / steps as f64;
        let initial = &disc.spec.initial;
        let mut u: Vec<f64> = disc.mesh.nodes()[1..disc.mesh.n_nodes() - 1]
            .iter()
            .map(|&x| initial(x))
            .collect();

        let startup_steps = 2.min(steps);
        let mut t = 0.0;
        // damped start: two implicit Euler half steps per replaced CN step
        if startup_steps > 0 {
            let h = 0.5 * tau;
            let lhs = disc.mass.lincomb(1.0, &disc.stiffness, h);
            for _ in 0..2 * startup_steps {
                let mut rhs = disc.mass.mul_vec(&u);
                let load = disc.source_load(t + h);
                rhs.iter_mut().zip(&load).for_each(|(r, l)| *r += h * l);
                u = lhs.solve(&rhs)?;
                t += h;
            }
        }

        let lhs = disc.mass.lincomb(1.0, &disc.stiffness, 0.5 * tau);
        let rhs_op = disc.mass.lincomb(1.0, &disc.stiffness, -0.5 * tau);
        let mut load_prev = disc.source_load(t);
        for n in startup_steps..steps {
            let t_next = if n + 1 == steps {
                horizon
            } else {
                tau * (n + 1) as f64
            };
            let load_next = disc.source_load(t_next);
            let mut rhs = rhs_op.mul_vec(&u);
            for ((r, a), b) in rhs.iter_mut().zip(&load_prev).zip(&load_next) {
                *r += 0.5 * tau * (a + b);
            }
            u = lhs.solve(&rhs)?;
            load_prev = load_next;
        }
        Ok(u)
    }

    /// Richardson combination of the runs with `steps` and `2 steps`.
    fn extrapolated(&self, steps: usize) -> Result<Vec<f64>> {
        let (coarse, fine) = rayon::join(|| self.solve(steps), || self.solve(2 * steps));
        let (coarse, fine) = (coarse?, fine?);
        Ok(fine
            .iter()
            .zip(&coarse)
            .map(|(f, c)| (4.0 * f - c) / 3.0)
            .collect())
    }
}

/// One reference level on a mesh with `elements` elements.
fn level(spec: &ProblemSpec, elements: usize, steps: usize) -> Result<NodalField> {
    let discs: Vec<Discretization> = [elements, 2 * elements]
        .into_par_iter()
        .map(|n| Discretization::uniform(spec, n))
        .collect::<Result<_>>()?;
    let sols: Vec<Vec<f64>> = discs
        .par_iter()
        .map(|disc| CnRunner { disc }.extrapolated(steps))
        .collect::<Result<_>>()?;
    let coarse = NodalField::from_interior(&sols[0]);
    let fine = NodalField::from_interior(&sols[1]);
    let values = coarse
        .values
        .iter()
        .enumerate()
        .map(|(i, c)| (4.0 * fine.values[2 * i] - c) / 3.0)
        .collect();
    Ok(NodalField::from_values(values))
}

pub fn solve_reference(
    spec: &ProblemSpec,
    tol: f64,
    options: &ReferenceOptions,
) -> Result<ReferenceSolution> {
    if tol.is_nan() || tol < MIN_TOL {
        return Err(Error::Config(format!(
            "oracle tolerance {tol:e} below {MIN_TOL:e}"
        )));
    }
    let key = cache_key(spec, tol, options);
    if let (Some(dir), Some(key)) = (&options.cache_dir, &key) {
        let path = dir.join(format!("{key}.bin"));
        if path.exists() {
            match read_cache(&path) {
                Ok(sol) if sol.accuracy <= tol => {
                    info!("reference loaded from {}", path.display());
                    return Ok(sol);
                }
                Ok(_) => {}
                Err(e) => debug!("ignoring unreadable cache file: {e}"),
            }
        }
    }

    let base_steps = ((options.steps_per_unit_time as f64 * spec.horizon).ceil() as usize).max(4);
    let mut prev = level(spec, options.elements, base_steps)?;
    let mut best = f64::INFINITY;
    for l in 1..=options.max_levels {
        let elements = options.elements << l;
        let next = level(spec, elements, base_steps << l)?;
        let accuracy = prev
            .values
            .iter()
            .enumerate()
            .fold(0.0_f64, |m, (i, p)| m.max((next.values[2 * i] - p).abs()));
        info!("reference level {l}: {elements} elements, self-convergence {accuracy:.3e}");
        best = best.min(accuracy);
        if accuracy <= tol {
            let sol = ReferenceSolution {
                mesh: SpatialMesh::uniform_for(spec, elements)?,
                values: next,
                accuracy,
            };
            if let (Some(dir), Some(key)) = (&options.cache_dir, &key) {
                write_cache(&dir.join(format!("{key}.bin")), &sol)?;
            }
            return Ok(sol);
        }
        prev = next;
    }
    Err(Error::OracleFailure {
        tol,
        achieved: best,
    })
}

fn cache_key(spec: &ProblemSpec, tol: f64, options: &ReferenceOptions) -> Option<String> {
    let fp = spec.fingerprint()?;
    let mut hasher = Sha256::new();
    hasher.update(fp.as_bytes());
    hasher.update(tol.to_le_bytes());
    hasher.update((options.elements as u64).to_le_bytes());
    hasher.update((options.steps_per_unit_time as u64).to_le_bytes());
    hasher.update((options.max_levels as u64).to_le_bytes());
    hasher.update(ALGORITHM_VERSION.to_le_bytes());
    Some(hex::encode(&hasher.finalize()[..16]))
}

pub fn write_cache(path: &Path, sol: &ReferenceSolution) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let n = sol.values.len();
    let mut buf = Vec::with_capacity(48 + 8 * n);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for v in [sol.mesh.x_left(), sol.mesh.x_right(), sol.accuracy] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &sol.values.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<ReferenceSolution> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |why: &str| Error::Config(format!("{}: {why}", path.display()));
    if bytes.len() < 48 || &bytes[..8] != MAGIC {
        return Err(bad("not a reference cache file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != FORMAT_VERSION {
        return Err(bad("unsupported version"));
    }
    let n = u64_at(16) as usize;
    if bytes.len() != 48 + 8 * n || n < 2 {
        return Err(bad("truncated"));
    }
    let (x_left, x_right, accuracy) = (f64_at(24), f64_at(32), f64_at(40));
    let values = (0..n).map(|i| f64_at(48 + 8 * i)).collect();
    Ok(ReferenceSolution {
        mesh: SpatialMesh::uniform(x_left, x_right, n - 1)?,
        values: NodalField::from_values(values),
        accuracy,
    })
}

/// `|u_h - u_ref|_inf` over the reference nodes, `u_h` interpolated linearly.
pub fn error_at_t(mesh: &SpatialMesh, u_h: &NodalField, reference: &ReferenceSolution) -> f64 {
    reference
        .mesh
        .nodes()
        .iter()
        .zip(&reference.values.values)
        .fold(0.0, |m, (&x, &r)| m.max((u_h.eval(mesh, x) - r).abs()))
}
