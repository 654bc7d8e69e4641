// Convergence matrix for the built-in test problem: error, bound,
// efficiency and the breakdown of the bound into its five columns.
//
// `cargo run --release --example convergence_tables [out_dir]`

use std::path::PathBuf;

use parabolic_apost::experiment::{emit_tables, run_matrix, text_tables, RunConfig};

pub fn run_example() -> parabolic_apost::Result<()> {
    let config = RunConfig::default();
    let records = run_matrix(&config)?;
    print!("{}", text_tables(&records, true));
    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        for path in emit_tables(&records, &dir, true)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> parabolic_apost::Result<()> {
    run_example()
}
