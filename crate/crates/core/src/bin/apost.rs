use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parabolic_apost::experiment::{emit_tables, powers_of_two, run_matrix, text_tables, RunConfig};
use parabolic_apost::parabolic_estimator::EtaFMode;
use parabolic_apost::reference_oracle::CACHE_ENV;
use parabolic_apost::{verify, Error, KPolicy, Result};

#[derive(Parser)]
#[command(
    name = "apost",
    version,
    about = "Maximum-norm error bounds for extrapolated backward Euler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the convergence matrix and write the tables.
    Run(RunArgs),
    /// Run the property suites; exit status 0 only if all pass.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in problem name or JSON problem file.
    #[arg(long, default_value = "paper-sect4")]
    problem: String,
    #[arg(long, default_value_t = 16)]
    m_min: usize,
    #[arg(long, default_value_t = 256)]
    m_max: usize,
    /// `last`, `sweep` or a fixed split index.
    #[arg(long, default_value = "last")]
    k_policy: String,
    #[arg(long, default_value = "simpson-paper")]
    eta_f_mode: String,
    #[arg(long, default_value = "residual-1d")]
    estimator: String,
    #[arg(long, default_value_t = 1e-9)]
    oracle_tol: f64,
    /// Output directory for the tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print efficiencies as 1/chi.
    #[arg(long)]
    reciprocal: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Reference solution cache.
    #[arg(long, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
    /// JSON run config; its entries override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_k_policy(s: &str) -> Result<KPolicy> {
    match s {
        "last" => Ok(KPolicy::Last),
        "sweep" => Ok(KPolicy::Sweep),
        _ => s
            .parse()
            .map(KPolicy::Fixed)
            .map_err(|_| Error::Config(format!("bad K policy {s:?}"))),
    }
}

impl RunArgs {
    fn to_config(&self) -> Result<RunConfig> {
        let from_flags = RunConfig {
            problem: self.problem.clone(),
            m_values: powers_of_two(self.m_min, self.m_max),
            k_policy: parse_k_policy(&self.k_policy)?,
            estimator: self.estimator.clone(),
            eta_f_mode: EtaFMode::parse(&self.eta_f_mode)?,
            oracle_tol: self.oracle_tol,
            out_dir: self.out.clone(),
            reciprocal_efficiency: self.reciprocal,
            workers: self.workers,
            cache_dir: self.cache_dir.clone(),
            ..RunConfig::default()
        };
        let Some(path) = &self.config else {
            return Ok(from_flags);
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let overrides: serde_json::Value = serde_json::from_str(&text)?;
        let serde_json::Value::Object(overrides) = overrides else {
            return Err(Error::Config(format!(
                "{} is not a JSON object",
                path.display()
            )));
        };
        let mut merged = serde_json::to_value(&from_flags)?;
        if let serde_json::Value::Object(base) = &mut merged {
            base.extend(overrides);
        }
        Ok(serde_json::from_value(merged)?)
    }
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let config = args.to_config()?;
    let records = run_matrix(&config)?;
    print!("{}", text_tables(&records, config.reciprocal_efficiency));
    if let Some(dir) = &config.out_dir {
        for path in emit_tables(&records, dir, config.reciprocal_efficiency)? {
            eprintln!("wrote {}", path.display());
        }
    }
    let complete = records.iter().all(|r| r.failure.is_none());
    Ok(if complete {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn verify(args: &RunArgs) -> Result<ExitCode> {
    let report = verify::run_all(&args.to_config()?)?;
    for check in &report.checks {
        println!("{check}");
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Verify(args) => verify(args),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
