// Accurate reference solution at the final time, with an on-disk cache
// keyed by the problem data and the requested tolerance.

use std::time::Instant;

use parabolic_apost::problem::builtin_test_problem;
use parabolic_apost::reference_oracle::{solve_reference, ReferenceOptions};

pub fn run_example() -> parabolic_apost::Result<()> {
    let spec = builtin_test_problem();
    let cache = std::env::temp_dir().join("parabolic-apost-example-cache");
    let options = ReferenceOptions::for_production_mesh(64).with_cache_dir(Some(cache.clone()));
    for pass in ["cold", "cached"] {
        let started = Instant::now();
        let reference = solve_reference(&spec, 1e-9, &options)?;
        println!(
            "{pass}: {} nodes, estimated accuracy {:.1e}, u(0, T) = {:.12}, {:.2?}",
            reference.mesh.nodes().len(),
            reference.accuracy,
            reference.eval(0.0),
            started.elapsed()
        );
    }
    println!("cache in {}", cache.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> parabolic_apost::Result<()> {
    run_example()
}
