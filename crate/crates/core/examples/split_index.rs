// The bound depends on a split index `K`; compare the default
// `K = M - 1` with the minimum over all `K`.

use parabolic_apost::experiment::sci4;
use parabolic_apost::problem::builtin_test_problem;
use parabolic_apost::{estimate, EstimateOptions, KPolicy};

pub fn run_example() -> parabolic_apost::Result<()> {
    let spec = builtin_test_problem();
    println!("{:>4} {:>11} {:>11} {:>4}", "M", "K = M-1", "best K", "K");
    for m in [16, 32, 64] {
        let last = estimate(&spec, 2 * m, m, &EstimateOptions::default())?;
        let sweep = EstimateOptions {
            k_policy: KPolicy::Sweep,
            ..EstimateOptions::default()
        };
        let best = estimate(&spec, 2 * m, m, &sweep)?;
        println!(
            "{m:>4} {:>11} {:>11} {:>4}",
            sci4(last.breakdown.total),
            sci4(best.breakdown.total),
            best.breakdown.k
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> parabolic_apost::Result<()> {
    run_example()
}
