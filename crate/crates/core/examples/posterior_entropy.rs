//! The three posterior entropies of a pattern, exact by enumeration and by
//! the chain decomposition.

use lmselect::inference::{entropy_exact_with, pattern_entropies, ExactEvaluator};
use lmselect::model::{LMParameters, Matrix, ModelSpec, Pattern};

fn main() -> lmselect::Result<()> {
    let spec = ModelSpec::binary(2, 5, 1)?;
    let params = LMParameters {
        initial: vec![0.5, 0.5],
        transitions: vec![Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.1, 0.9]])?],
        emissions: vec![vec![Matrix::from_rows(vec![vec![0.8, 0.2], vec![0.2, 0.8]])?]],
    };

    for labels in [[0, 0, 0, 0, 0], [0, 0, 1, 1, 1], [0, 1, 0, 1, 0]] {
        let pattern = Pattern(labels.to_vec());
        let e = pattern_entropies(&params, &spec, &pattern)?;
        let brute = entropy_exact_with(&params, &spec, &pattern, ExactEvaluator::Enumeration)?;
        println!(
            "{labels:?}  EN = {:.6} (enumerated {:.6})  EN1 = {:.6}  EN2 = {:.6}",
            e.exact, brute, e.marginal, e.normalized
        );
    }
    Ok(())
}
