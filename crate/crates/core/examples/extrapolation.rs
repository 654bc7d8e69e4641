// One-step backward Euler against its extrapolation `u = 2w - v`:
// the first converges at order one in time, the second at order two.

use parabolic_apost::experiment::sci4;
use parabolic_apost::fem1d::Discretization;
use parabolic_apost::problem::builtin_test_problem;
use parabolic_apost::reference_oracle::{error_at_t, solve_reference, ReferenceOptions};
use parabolic_apost::timestepper::{run, InitialApprox, TimeGrid};

pub fn run_example() -> parabolic_apost::Result<()> {
    let spec = builtin_test_problem();
    let steps = [8, 16, 32, 64];
    let finest = 2 * steps[steps.len() - 1];
    let reference = solve_reference(&spec, 1e-9, &ReferenceOptions::for_production_mesh(finest))?;
    println!("{:>4} {:>11} {:>11}", "M", "one-step", "extrapolated");
    for m in steps {
        let disc = Discretization::uniform(&spec, 2 * m)?;
        let traj = run(
            &disc,
            &TimeGrid::uniform(spec.horizon, m)?,
            InitialApprox::Interpolant,
        )?;
        let e_v = error_at_t(&disc.mesh, &traj.v[m], &reference);
        let e_u = error_at_t(&disc.mesh, traj.final_field(), &reference);
        println!("{m:>4} {:>11} {:>11}", sci4(e_v), sci4(e_u));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> parabolic_apost::Result<()> {
    run_example()
}
