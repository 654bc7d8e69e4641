// Problems described in JSON: coefficients are picked by name with
// numeric parameters. The Green's bounds are data supplied with the
// problem; the values below are illustrative.

use parabolic_apost::experiment::{run_matrix_for, sci4, text_tables, RunConfig};
use parabolic_apost::problem::ProblemConfig;

const PROBLEM: &str = r#"{
    "name": "constant-load",
    "domain": [0.0, 1.0],
    "diffusion": 0.5,
    "reaction": {"kind": "constant", "value": 2.0},
    "source": {"kind": "time-polynomial", "coeffs": [1.0, -1.0]},
    "initial": {"kind": "sine-hump", "amplitude": 1.0},
    "horizon": 1.0,
    "greens": {"kappa0": 1.0, "kappa1": 1.0, "kappa1_prime": 0.0, "gamma": 0.0}
}"#;

pub fn run_example() -> parabolic_apost::Result<()> {
    let cfg = ProblemConfig::from_json(PROBLEM)?;
    let spec = cfg.build()?;
    println!(
        "{}: f(0.5, 0.25) = {}",
        cfg.name,
        sci4((spec.source)(0.5, 0.25))
    );
    let config = RunConfig {
        m_values: vec![8, 16, 32],
        ..RunConfig::default()
    };
    let records = run_matrix_for(&spec, &config)?;
    print!("{}", text_tables(&records, false));
    Ok(())
}

#[allow(dead_code)]
fn main() -> parabolic_apost::Result<()> {
    run_example()
}
