//! Multistart EM on a simulated dataset.

use lmselect::em::{canonicalize_states, fit, FitOptions};
use lmselect::simulate::{draw_dataset, scenario_preset};

fn main() -> lmselect::Result<()> {
    let scenario = scenario_preset("1", 3, 250)?;
    let data = draw_dataset(&scenario, 0);

    let result = canonicalize_states(&fit(&scenario.spec, &data, &FitOptions::default())?);
    println!(
        "loglik {:.4} after {} iterations (start {} {:?}, converged {})",
        result.log_likelihood, result.iterations, result.start_index, result.start_kind, result.converged
    );
    println!("free parameters {}", result.n_params);
    println!("initial   {:.3?}", result.params.initial);
    println!("transition {:.3?}", result.params.transition(1).to_rows());
    for j in 0..scenario.spec.responses() {
        println!("response {j} {:.3?}", result.params.emission(0, j).to_rows());
    }
    Ok(())
}
