//! Convergence-table harness: runs the scheme over a list of `M`, compares
//! with a reference solution, and writes the error/estimator table and the
//! component breakdown as CSV and aligned text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic_estimator::{EllipticEstimatorHandle, ResidualEstimator1d};
use crate::error::{Error, Result};
use crate::fem1d::DEFAULT_SAMPLES_PER_ELEMENT;
use crate::parabolic_estimator::{ColumnTotals, EtaFMode};
use crate::problem::{load_problem, ProblemSpec, BUILTIN_TEST_PROBLEM};
use crate::reference_oracle::{error_at_t, solve_reference, ReferenceOptions, ReferenceSolution};
use crate::timestepper::InitialApprox;
use crate::{estimate, EstimateOptions, KPolicy};

pub const TABLE1_HEADER: &str = "M,e_M,p_M,eta_eE,chi_M";
pub const TABLE2_HEADER: &str = "M,eta_init,eta_F,eta_ell_MK,eta_dpsi,eta_zh";
pub const TABLE1_FILE: &str = "table1.csv";
pub const TABLE2_FILE: &str = "table2.csv";
pub const TEXT_FILE: &str = "tables.txt";
pub const RECORDS_FILE: &str = "records.json";

/// Terms the bound leaves out; copied into every record.
pub const NEGLECTED_TERMS: &str = "quadrature perturbation of a_h and (.,.)_h \
    (Simpson assembly, O(h^4)) is not part of the elliptic estimator";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in problem name or path to a JSON problem file.
    pub problem: String,
    pub m_values: Vec<usize>,
    pub k_policy: KPolicy,
    pub estimator: String,
    pub eta_f_mode: EtaFMode,
    pub oracle_tol: f64,
    pub out_dir: Option<PathBuf>,
    pub samples_per_element: usize,
    pub initial: InitialApprox,
    /// Print efficiencies as `1/chi` in the text table.
    pub reciprocal_efficiency: bool,
    /// Worker cap for the row loop; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Reference cache directory; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: BUILTIN_TEST_PROBLEM.to_owned(),
            m_values: powers_of_two(16, 256),
            k_policy: KPolicy::Last,
            estimator: ResidualEstimator1d::NAME.to_owned(),
            eta_f_mode: EtaFMode::SimpsonPaper,
            oracle_tol: 1e-9,
            out_dir: None,
            samples_per_element: DEFAULT_SAMPLES_PER_ELEMENT,
            initial: InitialApprox::Interpolant,
            reciprocal_efficiency: false,
            workers: None,
            cache_dir: None,
        }
    }
}

/// `m_min, 2 m_min, ...` up to `m_max`.
pub fn powers_of_two(m_min: usize, m_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut m = m_min.max(1);
    while m <= m_max {
        out.push(m);
        m *= 2;
    }
    out
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() {
            return Err(Error::Config("empty M list".into()));
        }
        if let Some(&m) = self.m_values.iter().find(|&&m| m < 2) {
            return Err(Error::Config(format!("M = {m} must be at least 2")));
        }
        if let KPolicy::Fixed(k) = self.k_policy {
            let m_min = *self.m_values.iter().min().unwrap();
            if k >= m_min {
                return Err(Error::SplitIndex { k, max: m_min - 1 });
            }
        }
        if self.samples_per_element < 2 {
            return Err(Error::Config("need at least 2 samples per element".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("worker cap must be positive".into()));
        }
        EllipticEstimatorHandle::by_name(&self.estimator)?;
        Ok(())
    }

    fn estimate_options(&self) -> Result<EstimateOptions> {
        Ok(EstimateOptions {
            estimator: EllipticEstimatorHandle::by_name(&self.estimator)?,
            eta_f_mode: self.eta_f_mode,
            k_policy: self.k_policy,
            initial: self.initial,
            samples_per_element: Some(self.samples_per_element),
        })
    }
}

/// Spatial elements used with `M` time steps: `h = tau`.
pub fn elements_for(spec: &ProblemSpec, m: usize) -> usize {
    ((m as f64) * spec.length() / spec.horizon).round().max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub problem: String,
    pub estimator: String,
    pub estimator_constants: Vec<(String, f64)>,
    pub eta_f_mode: EtaFMode,
    /// `eta_F` column evaluated with the other mode.
    pub eta_f_other_mode: f64,
    pub k: usize,
    pub initial: InitialApprox,
    pub samples_per_element: usize,
    pub quadrature: String,
    pub neglected: String,
    pub oracle_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub m: usize,
    pub elements: usize,
    pub e_m: Option<f64>,
    pub p_m: Option<f64>,
    pub eta: Option<f64>,
    /// `eta / e_M`
    pub chi_m: Option<f64>,
    pub columns: Option<ColumnTotals>,
    pub solve_seconds: f64,
    pub metadata: Option<RunMetadata>,
    /// Why the row is incomplete.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn efficiency(&self) -> Option<f64> {
        match (self.eta, self.e_m) {
            (Some(eta), Some(e)) if e > 0.0 => Some(eta / e),
            _ => None,
        }
    }

    pub fn is_reliable(&self) -> Option<bool> {
        Some(self.eta? >= self.e_m?)
    }
}

fn eoc(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).ln() / std::f64::consts::LN_2)
}

/// Runs every `M` of the config. Oracle problems fail their rows only.
pub fn run_matrix(config: &RunConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let spec = load_problem(&config.problem)?;
    run_matrix_for(&spec, config)
}

pub fn run_matrix_for(spec: &ProblemSpec, config: &RunConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    if let Err(v) = spec.validate() {
        return Err(Error::Problem(v.to_string()));
    }
    let options = config.estimate_options()?;
    let mut ms = config.m_values.clone();
    ms.sort_unstable();
    ms.dedup();
    let finest = elements_for(spec, *ms.last().unwrap());

    let started = Instant::now();
    let reference = solve_reference(
        spec,
        config.oracle_tol,
        &ReferenceOptions::for_production_mesh(finest).with_cache_dir(config.cache_dir.clone()),
    );
    match &reference {
        Ok(r) => info!(
            "reference ready in {:.2?} (accuracy {:.2e})",
            started.elapsed(),
            r.accuracy
        ),
        Err(e) => warn!("reference failed: {e}"),
    }
    let reference = reference.map_err(|e| e.to_string());

    let row = |&m: &usize| run_row(spec, m, &options, config, &reference);
    let mut records: Vec<RunRecord> = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| ms.par_iter().map(row).collect()),
        None => ms.par_iter().map(row).collect(),
    };
    for i in 1..records.len() {
        if let (Some(c), Some(f)) = (records[i - 1].e_m, records[i].e_m) {
            // p_M is only meaningful for M / 2 -> M
            if records[i].m == 2 * records[i - 1].m {
                records[i].p_m = eoc(c, f);
            }
        }
    }
    Ok(records)
}

fn run_row(
    spec: &ProblemSpec,
    m: usize,
    options: &EstimateOptions,
    config: &RunConfig,
    reference: &std::result::Result<ReferenceSolution, String>,
) -> RunRecord {
    let elements = elements_for(spec, m);
    let started = Instant::now();
    let mut record = RunRecord {
        m,
        elements,
        e_m: None,
        p_m: None,
        eta: None,
        chi_m: None,
        columns: None,
        solve_seconds: 0.0,
        metadata: None,
        failure: None,
    };
    let run = match estimate(spec, elements, m, options) {
        Ok(run) => run,
        Err(e) => {
            record.failure = Some(format!("solver: {e}"));
            return record;
        }
    };
    let b = &run.breakdown;
    record.eta = Some(b.total);
    record.columns = Some(b.columns);
    record.metadata = Some(RunMetadata {
        problem: spec.name.clone(),
        estimator: options.estimator.name().to_owned(),
        estimator_constants: options
            .estimator
            .constants(&run.disc)
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect(),
        eta_f_mode: b.eta_f_mode,
        eta_f_other_mode: b.eta_f_other_mode,
        k: b.k,
        initial: options.initial,
        samples_per_element: config.samples_per_element,
        quadrature: "exact mass and diffusion, Simpson reaction and load".to_owned(),
        neglected: NEGLECTED_TERMS.to_owned(),
        oracle_accuracy: reference.as_ref().ok().map(|r| r.accuracy),
    });
    match reference {
        Ok(r) => {
            let e = error_at_t(&run.disc.mesh, run.trajectory.final_field(), r);
            record.e_m = Some(e);
            record.chi_m = record.efficiency();
        }
        Err(reason) => record.failure = Some(format!("oracle: {reason}")),
    }
    record.solve_seconds = started.elapsed().as_secs_f64();
    record
}

/// Scientific notation with 4 significant digits and at least two exponent
/// digits, e.g. `3.872e-04`.
pub fn sci4(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.3e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ("-", d),
        None => ("+", exp),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}

fn opt(x: Option<f64>, f: impl Fn(f64) -> String) -> String {
    x.map(f).unwrap_or_default()
}

pub fn table1_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{TABLE1_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.m,
            opt(r.e_m, sci4),
            opt(r.p_m, |p| format!("{p:.2}")),
            opt(r.eta, sci4),
            opt(r.chi_m, sci4)
        );
    }
    out
}

pub fn table2_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{TABLE2_HEADER}\n");
    for r in records {
        let cells: Vec<String> = match &r.columns {
            Some(c) => c.as_array().iter().map(|(_, v)| sci4(*v)).collect(),
            None => vec![String::new(); 5],
        };
        let _ = writeln!(out, "{},{}", r.m, cells.join(","));
    }
    out
}

fn efficiency_cell(chi: Option<f64>, reciprocal: bool) -> String {
    match chi {
        Some(c) if reciprocal => format!("1/{}", c.round()),
        Some(c) => sci4(c),
        None => "-".to_owned(),
    }
}

/// Both tables as aligned text.
pub fn text_tables(records: &[RunRecord], reciprocal: bool) -> String {
    let mut out = String::new();
    let dash = |x: Option<f64>, f: fn(f64) -> String| x.map(f).unwrap_or_else(|| "-".to_owned());
    let chi_head = if reciprocal { "1/chi_M" } else { "chi_M" };
    let _ = writeln!(
        out,
        "{:>6} {:>11} {:>6} {:>11} {:>11}",
        "M", "e_M", "p_M", "eta_eE", chi_head
    );
    for r in records {
        let _ = write!(
            out,
            "{:>6} {:>11} {:>6} {:>11} {:>11}",
            r.m,
            dash(r.e_m, sci4),
            dash(r.p_m, |p| format!("{p:.2}")),
            dash(r.eta, sci4),
            efficiency_cell(r.chi_m, reciprocal)
        );
        if let Some(f) = &r.failure {
            let _ = write!(out, "  ({f})");
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:>6} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "M", "eta_init", "eta_F", "eta_ell_MK", "eta_dpsi", "eta_zh"
    );
    for r in records {
        let _ = write!(out, "{:>6}", r.m);
        match &r.columns {
            Some(c) => {
                for (_, v) in c.as_array() {
                    let _ = write!(out, " {:>11}", sci4(v));
                }
            }
            None => {
                for _ in 0..5 {
                    let _ = write!(out, " {:>11}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Writes both CSV tables, the text tables and the full records into `dir`.
pub fn emit_tables(records: &[RunRecord], dir: &Path, reciprocal: bool) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Config("no records to write".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        (TABLE1_FILE, table1_csv(records)),
        (TABLE2_FILE, table2_csv(records)),
        (TEXT_FILE, text_tables(records, reciprocal)),
        (RECORDS_FILE, serde_json::to_string_pretty(records)? + "\n"),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// One parsed row of the error/estimator CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub m: usize,
    pub e_m: Option<f64>,
    pub p_m: Option<f64>,
    pub eta: Option<f64>,
    pub chi_m: Option<f64>,
}

fn parse_cell(cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| Error::Config(format!("bad number {cell:?}")))
}

pub fn parse_table1(text: &str) -> Result<Vec<Table1Row>> {
    let mut lines = text.lines();
    if lines.next() != Some(TABLE1_HEADER) {
        return Err(Error::Config("unexpected table header".into()));
    }
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 5 {
                return Err(Error::Config(format!("expected 5 cells in {line:?}")));
            }
            Ok(Table1Row {
                m: cells[0]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad M {:?}", cells[0])))?,
                e_m: parse_cell(cells[1])?,
                p_m: parse_cell(cells[2])?,
                eta: parse_cell(cells[3])?,
                chi_m: parse_cell(cells[4])?,
            })
        })
        .collect()
}

/// Parses the breakdown CSV into `(M, [five columns])`.
pub fn parse_table2(text: &str) -> Result<Vec<(usize, [Option<f64>; 5])>> {
    let mut lines = text.lines();
    if lines.next() != Some(TABLE2_HEADER) {
        return Err(Error::Config("unexpected table header".into()));
    }
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 6 {
                return Err(Error::Config(format!("expected 6 cells in {line:?}")));
            }
            let m = cells[0]
                .parse()
                .map_err(|_| Error::Config(format!("bad M {:?}", cells[0])))?;
            let mut vals = [None; 5];
            for (v, c) in vals.iter_mut().zip(&cells[1..]) {
                *v = parse_cell(c)?;
            }
            Ok((m, vals))
        })
        .collect()
}
