// Residual estimator for `-eps y'' + r y = g` against the exact error of
// a manufactured solution.

use parabolic_apost::elliptic_estimator::EllipticEstimatorHandle;
use parabolic_apost::experiment::sci4;
use parabolic_apost::problem::builtin_test_problem;
use parabolic_apost::verify::elliptic_study;

pub fn run_example() -> parabolic_apost::Result<()> {
    let spec = builtin_test_problem();
    let rows = elliptic_study(
        &spec,
        &[8, 16, 32, 64, 128],
        &EllipticEstimatorHandle::default(),
    )?;
    println!("{:>5} {:>11} {:>11} {:>6}", "N", "error", "eta", "ratio");
    for r in rows {
        println!(
            "{:>5} {:>11} {:>11} {:>6.2}",
            r.elements,
            sci4(r.error),
            sci4(r.eta),
            r.eta / r.error
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> parabolic_apost::Result<()> {
    run_example()
}
