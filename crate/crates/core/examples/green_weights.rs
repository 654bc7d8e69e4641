// Time weights of the bound on a graded grid, checked against numerical
// quadrature of their defining integrals.

use parabolic_apost::experiment::sci4;
use parabolic_apost::parabolic_estimator::compute_weights;
use parabolic_apost::problem::builtin_test_problem;
use parabolic_apost::timestepper::TimeGrid;
use parabolic_apost::verify::weight_defect;

pub fn run_example() -> parabolic_apost::Result<()> {
    let greens = builtin_test_problem().greens;
    // graded towards t = 0
    let times: Vec<f64> = (0..=8).map(|j| (j as f64 / 8.0).powi(2)).collect();
    let grid = TimeGrid::new(times)?;
    let w = compute_weights(&grid, &greens);
    println!(
        "{:>2} {:>8} {:>10} {:>10} {:>10}",
        "j", "t_j", "sigma", "mu", "chi"
    );
    for j in 1..=grid.steps() {
        println!(
            "{j:>2} {:>8.5} {:>10} {:>10} {:>10}",
            grid.t(j),
            sci4(w.sigma[j]),
            sci4(w.mu[j]),
            sci4(w.chi[j])
        );
    }
    println!(
        "largest mismatch against quadrature: {:.2e}",
        weight_defect(&grid, &greens)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> parabolic_apost::Result<()> {
    run_example()
}
