//! Draws a reproducible dataset from a preset and writes it as CSV to stdout.

use lmselect::io::write_dataset;
use lmselect::simulate::{draw_dataset, scenario_preset};

fn main() -> lmselect::Result<()> {
    let scenario = scenario_preset("4", 3, 500)?.with_seed(99);
    let data = draw_dataset(&scenario, 0);
    eprintln!("{} units, {} distinct patterns", data.n(), data.distinct());

    // same seed and replicate index, same dataset
    assert_eq!(data, draw_dataset(&scenario, 0));

    write_dataset(std::io::stdout().lock(), &data)
}
