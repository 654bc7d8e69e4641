// Convergence study with a closed-form solution, so no reference solve
// is needed.

use parabolic_apost::experiment::sci4;
use parabolic_apost::fem1d::sup_norm_sampled;
use parabolic_apost::problem::ProblemConfig;
use parabolic_apost::{estimate, EstimateOptions};

pub fn run_example() -> parabolic_apost::Result<()> {
    let cfg = ProblemConfig::manufactured_sine_decay();
    let spec = cfg.build()?;
    let exact = cfg.exact_solution().expect("closed form");
    println!("{:>4} {:>11} {:>5} {:>11}", "M", "e_M", "p_M", "eta");
    let mut previous: Option<f64> = None;
    for m in [16, 32, 64, 128] {
        let run = estimate(&spec, 2 * m, m, &EstimateOptions::default())?;
        let mesh = &run.disc.mesh;
        let u_h = run.trajectory.final_field();
        let e = sup_norm_sampled(mesh, 33, |el, x| {
            u_h.eval_in(mesh, el, x) - exact(x, spec.horizon)
        });
        let p = previous.map_or(String::new(), |prev| format!("{:.2}", (prev / e).log2()));
        println!(
            "{m:>4} {:>11} {p:>5} {:>11}",
            sci4(e),
            sci4(run.breakdown.total)
        );
        previous = Some(e);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> parabolic_apost::Result<()> {
    run_example()
}
