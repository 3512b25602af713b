//! Checks reverse-mode gradients of the tiny network against central
//! finite differences.

use textsr::model::ModelConfig;
use textsr::train::gradcheck;

pub fn run_example() -> textsr::Result<()> {
    let report = gradcheck(&ModelConfig::tiny(2), 6, 1e-4, 0)?;
    for t in &report.tensors {
        println!("{:<18} {:>5} params  max rel err {:.2e}", t.name, t.params, t.max_rel_error);
    }
    println!("all below 1e-4: {}", report.passes(1e-4));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
