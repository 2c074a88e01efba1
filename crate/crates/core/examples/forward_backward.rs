//! Log-probability and posterior state probabilities for one response pattern.

use lmselect::inference::ForwardBackwardTables;
use lmselect::model::{LMParameters, Matrix, ModelSpec, Pattern};

fn main() -> lmselect::Result<()> {
    let spec = ModelSpec::binary(2, 5, 1)?;
    let params = LMParameters {
        initial: vec![0.5, 0.5],
        transitions: vec![Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.1, 0.9]])?],
        emissions: vec![vec![Matrix::from_rows(vec![vec![0.8, 0.2], vec![0.2, 0.8]])?]],
    };
    let pattern = Pattern(vec![0, 0, 1, 1, 1]);

    let tables = ForwardBackwardTables::compute(&params, &spec, &pattern)?;
    println!("log p(y) = {:.6}", tables.log_prob());

    let post = tables.posteriors(&params);
    for t in 0..spec.occasions {
        let m = post.marginal(t);
        println!("t={t}  p(state 0) = {:.4}  p(state 1) = {:.4}", m[0], m[1]);
    }
    println!("p(state 0 -> state 1 between t=2 and t=3) = {:.4}", post.joint(2, 0, 1));
    Ok(())
}
