//! Continuous piecewise-linear finite elements on an interval.
//!
//! Only interior nodes carry unknowns; every [`TriDiagonal`] is indexed by
//! interior node (`0` is the node next to `x_left`). Mass and diffusion
//! integrals are exact; reaction and load integrals use Simpson's rule on
//! each element.

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

/// Default number of equispaced samples per element, endpoints included,
/// for maximum-norm approximations of non-P1 functions.
pub const DEFAULT_SAMPLES_PER_ELEMENT: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    nodes: Vec<f64>,
}

impl SpatialMesh {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Mesh("need at least one element".into()));
        }
        if let Some(i) = nodes.iter().position(|x| !x.is_finite()) {
            return Err(Error::Mesh(format!("node {i} is not finite")));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Mesh(format!(
                "nodes must be strictly increasing (x[{}] = {} >= x[{}] = {})",
                i,
                nodes[i],
                i + 1,
                nodes[i + 1]
            )));
        }
        Ok(SpatialMesh { nodes })
    }

    pub fn uniform(x_left: f64, x_right: f64, elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(Error::Mesh("need at least one element".into()));
        }
        let h = (x_right - x_left) / elements as f64;
        let mut nodes: Vec<f64> = (0..=elements).map(|i| x_left + h * i as f64).collect();
        nodes[elements] = x_right;
        Self::new(nodes)
    }

    /// Uniform mesh on the problem's domain.
    pub fn uniform_for(spec: &ProblemSpec, elements: usize) -> Result<Self> {
        Self::uniform(spec.x_left, spec.x_right, elements)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_interior(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn x_left(&self) -> f64 {
        self.nodes[0]
    }

    pub fn x_right(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Width of element `e` (between nodes `e` and `e + 1`).
    pub fn width(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn max_width(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| self.width(e))
            .fold(0.0, f64::max)
    }

    /// Element containing `x`; points outside the domain are clamped.
    pub fn locate(&self, x: f64) -> usize {
        let last = self.n_elements() - 1;
        match self.nodes.partition_point(|&n| n <= x) {
            0 => 0,
            i => (i - 1).min(last),
        }
    }

    /// The `n_s` equispaced sample points of element `e`, endpoints included.
    pub fn element_samples(&self, e: usize, n_s: usize) -> impl Iterator<Item = f64> + '_ {
        let (a, h) = (self.nodes[e], self.width(e));
        let n_s = n_s.max(2);
        (0..n_s).map(move |i| {
            if i == n_s - 1 {
                a + h
            } else {
                a + h * i as f64 / (n_s - 1) as f64
            }
        })
    }
}

/// Nodal values of a continuous piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(mesh: &SpatialMesh) -> Self {
        NodalField {
            values: vec![0.0; mesh.n_nodes()],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        NodalField { values }
    }

    /// Field with the given interior values and zero boundary values.
    pub fn from_interior(interior: &[f64]) -> Self {
        let mut values = Vec::with_capacity(interior.len() + 2);
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        NodalField { values }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &SpatialMesh, f: impl Fn(f64) -> f64) -> Self {
        NodalField {
            values: mesh.nodes().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    pub fn vanishes_on_boundary(&self) -> bool {
        self.values[0] == 0.0 && self.values[self.values.len() - 1] == 0.0
    }

    /// Exact maximum norm: a P1 function attains its extrema at nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at `x` inside element `e`.
    pub fn eval_in(&self, mesh: &SpatialMesh, e: usize, x: f64) -> f64 {
        let (a, b) = (mesh.nodes()[e], mesh.nodes()[e + 1]);
        let s = (x - a) / (b - a);
        (1.0 - s) * self.values[e] + s * self.values[e + 1]
    }

    pub fn eval(&self, mesh: &SpatialMesh, x: f64) -> f64 {
        self.eval_in(mesh, mesh.locate(x), x)
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &NodalField, b: f64) -> NodalField {
        debug_assert_eq!(self.len(), other.len());
        NodalField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> NodalField {
        NodalField {
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &NodalField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// Maximum of `|f|` over `n_s` equispaced samples per element, endpoints
/// included. `f` receives the element index and the sample point.
pub fn sup_norm_sampled(mesh: &SpatialMesh, n_s: usize, f: impl Fn(usize, f64) -> f64) -> f64 {
    let mut max = 0.0_f64;
    for e in 0..mesh.n_elements() {
        for x in mesh.element_samples(e, n_s) {
            max = max.max(f(e, x).abs());
        }
    }
    max
}

/// Tridiagonal matrix on the interior nodes. `lower[0]` and `upper[n-1]`
/// are unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TriDiagonal {
    pub fn zeros(n: usize) -> Self {
        TriDiagonal {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        TriDiagonal {
            diag: vec![1.0; n],
            ..Self::zeros(n)
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &TriDiagonal, b: f64) -> TriDiagonal {
        let comb = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        TriDiagonal {
            lower: comb(&self.lower, &other.lower),
            diag: comb(&self.diag, &other.diag),
            upper: comb(&self.upper, &other.upper),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n, "tridiagonal product dimension");
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Product with the interior part of a nodal field.
    pub fn apply(&self, field: &NodalField) -> Vec<f64> {
        self.mul_vec(field.interior())
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.lower[i].abs() + self.diag[i].abs() + self.upper[i].abs())
            .fold(0.0, f64::max)
    }

    pub fn check_strict_dominance(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            let mut off = 0.0;
            if i > 0 {
                off += self.lower[i].abs();
            }
            if i + 1 < n {
                off += self.upper[i].abs();
            }
            if self.diag[i].abs() <= off {
                return Err(Error::NotDominant { row: i });
            }
        }
        Ok(())
    }

    /// Thomas algorithm.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::Dimension(format!(
                "right-hand side has length {}, matrix has dimension {n}",
                rhs.len()
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 {
            return Err(Error::ZeroPivot { row: 0 });
        }
        c[0] = self.upper[0] / pivot;
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::ZeroPivot { row: i });
            }
            c[i] = if i + 1 < n {
                self.upper[i] / pivot
            } else {
                0.0
            };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = self.diag[i];
            if i > 0 {
                a[i][i - 1] = self.lower[i];
            }
            if i + 1 < n {
                a[i][i + 1] = self.upper[i];
            }
        }
        a
    }
}

/// Scatters a 2x2 element matrix for element `e` into the interior system.
fn scatter(m: &mut TriDiagonal, n_elements: usize, e: usize, local: [[f64; 2]; 2]) {
    // element e couples nodes e and e+1, i.e. interior rows e-1 and e
    let left = (e > 0).then(|| e - 1);
    let right = (e + 1 < n_elements).then_some(e);
    if let Some(l) = left {
        m.diag[l] += local[0][0];
    }
    if let Some(r) = right {
        m.diag[r] += local[1][1];
    }
    if let (Some(l), Some(r)) = (left, right) {
        m.upper[l] += local[0][1];
        m.lower[r] += local[1][0];
    }
}

/// Matrix of `a_h(phi_i, phi_j) = int eps phi_i' phi_j' + r phi_i phi_j`.
pub fn assemble_stiffness(
    mesh: &SpatialMesh,
    eps: f64,
    r: &dyn Fn(f64) -> f64,
) -> Result<TriDiagonal> {
    let n_el = mesh.n_elements();
    let mut m = TriDiagonal::zeros(mesh.n_interior());
    for e in 0..n_el {
        let (a, h) = (mesh.nodes()[e], mesh.width(e));
        let b = mesh.nodes()[e + 1];
        let (r0, rm, r1) = (r(a), r(a + 0.5 * h), r(b));
        if let Some(&bad) = [r0, rm, r1].iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Problem(format!(
                "reaction coefficient {bad} is negative or not finite on element {e}"
            )));
        }
        // Simpson: weights h/6 (1, 4, 1); hats are (1, 1/2, 0) and (0, 1/2, 1)
        let k = eps / h;
        let s = h / 6.0;
        let local = [
            [k + s * (r0 + rm), -k + s * rm],
            [-k + s * rm, k + s * (rm + r1)],
        ];
        scatter(&mut m, n_el, e, local);
    }
    Ok(m)
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &SpatialMesh) -> TriDiagonal {
    let n_el = mesh.n_elements();
    let mut m = TriDiagonal::zeros(mesh.n_interior());
    for e in 0..n_el {
        let h = mesh.width(e);
        let local = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        scatter(&mut m, n_el, e, local);
    }
    m
}

/// Load vector `(g, phi_i)_h` by Simpson's rule on each element.
pub fn assemble_load(mesh: &SpatialMesh, g: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let n_el = mesh.n_elements();
    let mut load = vec![0.0; mesh.n_interior()];
    for e in 0..n_el {
        let (a, h) = (mesh.nodes()[e], mesh.width(e));
        let (g0, gm, g1) = (g(a), g(a + 0.5 * h), g(a + h));
        let s = h / 6.0;
        if e > 0 {
            load[e - 1] += s * (g0 + 2.0 * gm);
        }
        if e + 1 < n_el {
            load[e] += s * (2.0 * gm + g1);
        }
    }
    load
}

pub fn solve_tridiagonal(system: &TriDiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    system.solve(rhs)
}

/// A problem together with a mesh and its assembled matrices.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub spec: ProblemSpec,
    pub mesh: SpatialMesh,
    pub mass: TriDiagonal,
    pub stiffness: TriDiagonal,
    /// Samples per element for maximum norms of non-P1 functions.
    pub samples_per_element: usize,
}

impl Discretization {
    pub fn new(spec: &ProblemSpec, mesh: SpatialMesh) -> Result<Self> {
        if (mesh.x_left() - spec.x_left).abs() > 1e-14 * spec.length()
            || (mesh.x_right() - spec.x_right).abs() > 1e-14 * spec.length()
        {
            return Err(Error::Mesh(format!(
                "mesh spans ({}, {}) but the domain is ({}, {})",
                mesh.x_left(),
                mesh.x_right(),
                spec.x_left,
                spec.x_right
            )));
        }
        let stiffness = assemble_stiffness(&mesh, spec.diffusion, spec.reaction.as_ref())?;
        let mass = assemble_mass(&mesh);
        Ok(Discretization {
            spec: spec.clone(),
            mesh,
            mass,
            stiffness,
            samples_per_element: DEFAULT_SAMPLES_PER_ELEMENT,
        })
    }

    pub fn uniform(spec: &ProblemSpec, elements: usize) -> Result<Self> {
        Self::new(spec, SpatialMesh::uniform_for(spec, elements)?)
    }

    pub fn with_samples(mut self, n_s: usize) -> Self {
        self.samples_per_element = n_s.max(2);
        self
    }

    /// `(f(., t), phi_i)_h`
    pub fn source_load(&self, t: f64) -> Vec<f64> {
        let f = &self.spec.source;
        assemble_load(&self.mesh, &|x| f(x, t))
    }

    /// Maximum norm of an element-wise function by sampling.
    pub fn sup_sampled(&self, f: impl Fn(usize, f64) -> f64) -> f64 {
        sup_norm_sampled(&self.mesh, self.samples_per_element, f)
    }

    /// `(M + tau A)`, checked for strict diagonal dominance.
    pub fn implicit_matrix(&self, tau: f64) -> Result<TriDiagonal> {
        let m = self.mass.lincomb(1.0, &self.stiffness, tau);
        m.check_strict_dominance()?;
        Ok(m)
    }
}
