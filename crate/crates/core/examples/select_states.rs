//! Fits k = 1..=4 and reports every criterion and its selected k.

use lmselect::criteria::{evaluate_fits, select_k, Criterion};
use lmselect::em::{fit, FitOptions};
use lmselect::simulate::{draw_dataset, scenario_preset};

fn main() -> lmselect::Result<()> {
    let scenario = scenario_preset("1", 3, 250)?;
    let data = draw_dataset(&scenario, 7);
    let opts = FitOptions::default();

    let fits = (1..=4)
        .map(|k| fit(&scenario.spec.with_states(k), &data, &opts))
        .collect::<lmselect::Result<Vec<_>>>()?;
    let values = evaluate_fits(&fits, &data)?;
    let report = select_k(&values)?;

    print!("{:>8}", "k");
    for v in &values {
        print!("{:>12}", v.k);
    }
    println!();
    for c in Criterion::ALL {
        print!("{:>8}", c.name());
        for v in &values {
            print!("{:>12.3}", v.get(c));
        }
        println!("   -> k = {}", report.selected(c));
    }
    Ok(())
}
