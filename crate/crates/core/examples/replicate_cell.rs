//! A small Monte Carlo cell: selection frequencies over a few replicates.

use lmselect::criteria::Criterion;
use lmselect::harness::{run_cell, ProgressEvent, StudyConfig};
use lmselect::simulate::scenario_preset;

fn main() -> lmselect::Result<()> {
    let mut config = StudyConfig::new(&["2"], &[1], &[250]);
    config.replicates = 8;
    config.k_max = 3;
    let scenario = scenario_preset("2", 1, 250)?
        .with_seed(config.master_seed)
        .with_replicates(config.replicates);

    let progress = |e: &ProgressEvent| {
        if let ProgressEvent::ReplicateFinished { done, total, .. } = e {
            eprintln!("{done}/{total}");
        }
    };
    let cell = run_cell(&scenario, &config, Some(&progress))?;

    println!("{} ({} successful)", cell.label(), cell.successful());
    for c in Criterion::ALL {
        println!("{:>8} {:.3?}", c.name(), cell.row(c));
    }
    Ok(())
}
