//! Monte Carlo study: simulate replicates, fit `k = 1..k_max`, evaluate every
//! criterion, select, and tabulate how often each `k` is chosen.
//!
//! Replicates run in parallel; each owns the random substreams derived from
//! the master seed, the cell label and its index, and results are reduced in
//! replicate order, so the output does not depend on scheduling.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{evaluate_fits, select_k_with, Criterion, CriterionValues, SelectionRule};
use crate::em::{fit, FitOptions};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, DEFAULT_SEED};
use crate::simulate::{draw_dataset, scenario_preset, Scenario};

fn default_k_max() -> usize {
    5
}

fn default_replicates() -> usize {
    100
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Study design: the cross product of scenarios, `r` values and `n` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub scenarios: Vec<String>,
    pub r_values: Vec<usize>,
    pub n_values: Vec<usize>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub em: FitOptions,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub rule: SelectionRule,
}

impl StudyConfig {
    pub fn new(scenarios: &[&str], r_values: &[usize], n_values: &[usize]) -> Self {
        Self {
            scenarios: scenarios.iter().map(|s| s.to_string()).collect(),
            r_values: r_values.to_vec(),
            n_values: n_values.to_vec(),
            k_max: default_k_max(),
            replicates: default_replicates(),
            em: FitOptions::default(),
            master_seed: DEFAULT_SEED,
            rule: SelectionRule::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.replicates == 0 {
            problems.push("replicates: must be at least 1".to_string());
        }
        if self.k_max == 0 {
            problems.push("k_max: must be at least 1".to_string());
        }
        if self.scenarios.is_empty() {
            problems.push("scenarios: must not be empty".to_string());
        }
        if self.r_values.is_empty() || self.r_values.contains(&0) {
            problems.push("r_values: must be a non-empty list of positive integers".to_string());
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            problems.push("n_values: must be a non-empty list of positive integers".to_string());
        }
        if !(self.em.tol > 0.0) {
            problems.push("em.tol: must be positive".to_string());
        }
        for s in &self.scenarios {
            if let Err(e) = crate::simulate::parse_scenario_id(s) {
                problems.push(format!("scenarios: {e}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    /// The runnable cells in (scenario, n, r) order, plus descriptions of
    /// combinations a preset does not define.
    pub fn cells(&self) -> Result<(Vec<Scenario>, Vec<String>)> {
        self.check()?;
        let mut cells = Vec::new();
        let mut skipped = Vec::new();
        for name in &self.scenarios {
            for &n in &self.n_values {
                for &r in &self.r_values {
                    match scenario_preset(name, r, n) {
                        Ok(s) => cells.push(
                            s.with_seed(self.master_seed)
                                .with_replicates(self.replicates),
                        ),
                        Err(Error::InvalidScenario(msg)) => {
                            skipped.push(format!("{name} r={r} n={n}: {msg}"))
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        Ok((cells, skipped))
    }
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: u64,
    /// Selected `k` per criterion, in [`Criterion::ALL`] order.
    pub selected: Vec<usize>,
    pub values: Vec<CriterionValues>,
    /// Largest per-iteration log-likelihood decrease over all fits.
    pub max_trace_decrease: f64,
    pub unconverged_fits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: u64,
    pub reason: String,
}

/// One (scenario, r, n) cell of the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: String,
    pub r: usize,
    pub n: usize,
    pub k_max: usize,
    pub replicates: usize,
    /// `counts[criterion][k - 1]`: replicates selecting `k`.
    pub counts: BTreeMap<Criterion, Vec<usize>>,
    pub outcomes: Vec<ReplicateOutcome>,
    pub failures: Vec<ReplicateFailure>,
}

impl CellResult {
    /// Replicates that produced a selection.
    pub fn successful(&self) -> usize {
        self.outcomes.len()
    }

    /// Relative frequency of `k` being chosen by `criterion`, over successful
    /// replicates (0 if none succeeded).
    pub fn frequency(&self, criterion: Criterion, k: usize) -> f64 {
        let ok = self.successful();
        if ok == 0 || k == 0 || k > self.k_max {
            return 0.0;
        }
        self.counts[&criterion][k - 1] as f64 / ok as f64
    }

    pub fn row(&self, criterion: Criterion) -> Vec<f64> {
        (1..=self.k_max).map(|k| self.frequency(criterion, k)).collect()
    }

    pub fn max_trace_decrease(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.max_trace_decrease)
            .fold(0.0, f64::max)
    }

    pub fn label(&self) -> String {
        format!("{} r={} n={}", self.scenario, self.r, self.n)
    }
}

/// Relative frequencies for every cell of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub config: StudyConfig,
    pub cells: Vec<CellResult>,
    pub skipped: Vec<String>,
}

impl FrequencyTable {
    pub fn cell(&self, scenario: &str, r: usize, n: usize) -> Option<&CellResult> {
        let id = crate::simulate::parse_scenario_id(scenario).ok()?;
        let name = format!("scenario{id}");
        self.cells
            .iter()
            .find(|c| c.scenario == name && c.r == r && c.n == n)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().map(|c| c.failures.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProgressEvent {
    CellStarted { label: String, replicates: usize },
    ReplicateFinished { label: String, done: usize, total: usize },
    CellFinished { label: String, failures: usize },
}

/// Fits `k = 1..=k_max` on one dataset and selects per criterion.
pub fn analyze_replicate(
    scenario: &Scenario,
    replicate: u64,
    k_max: usize,
    em: &FitOptions,
    rule: SelectionRule,
) -> Result<ReplicateOutcome> {
    let dataset = draw_dataset(scenario, replicate);
    let opts = FitOptions {
        seed: derive_seed(scenario.seed, &format!("{}/em", scenario.stream_label()), replicate),
        ..*em
    };
    let fits = (1..=k_max)
        .map(|k| fit(&scenario.spec.with_states(k), &dataset, &opts))
        .collect::<Result<Vec<_>>>()?;
    let values = evaluate_fits(&fits, &dataset)?;
    let report = select_k_with(&values, rule)?;
    Ok(ReplicateOutcome {
        replicate,
        selected: Criterion::ALL.iter().map(|&c| report.selected(c)).collect(),
        values,
        max_trace_decrease: fits.iter().map(|f| f.max_trace_decrease()).fold(0.0, f64::max),
        unconverged_fits: fits.iter().filter(|f| !f.converged).count(),
    })
}

type Progress<'a> = Option<&'a (dyn Fn(&ProgressEvent) + Sync)>;

/// Runs every replicate of one cell.
pub fn run_cell(scenario: &Scenario, config: &StudyConfig, progress: Progress<'_>) -> Result<CellResult> {
    config.check()?;
    let label = format!("{} r={} n={}", scenario.name, scenario.spec.responses(), scenario.n);
    let total = scenario.replicates;
    if let Some(cb) = progress {
        cb(&ProgressEvent::CellStarted { label: label.clone(), replicates: total });
    }
    let done = AtomicUsize::new(0);
    let results: Vec<std::result::Result<ReplicateOutcome, ReplicateFailure>> = (0..total as u64)
        .into_par_iter()
        .map(|i| {
            let out = analyze_replicate(scenario, i, config.k_max, &config.em, config.rule).map_err(|e| {
                ReplicateFailure {
                    replicate: i,
                    reason: e.to_string(),
                }
            });
            let d = done.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(cb) = progress {
                cb(&ProgressEvent::ReplicateFinished { label: label.clone(), done: d, total });
            }
            out
        })
        .collect();

    let mut counts: BTreeMap<Criterion, Vec<usize>> =
        Criterion::ALL.iter().map(|&c| (c, vec![0; config.k_max])).collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => {
                for (c, &k) in Criterion::ALL.iter().zip(&o.selected) {
                    counts.get_mut(c).expect("all criteria present")[k - 1] += 1;
                }
                outcomes.push(o);
            }
            Err(f) => failures.push(f),
        }
    }
    if let Some(cb) = progress {
        cb(&ProgressEvent::CellFinished { label, failures: failures.len() });
    }
    Ok(CellResult {
        scenario: scenario.name.clone(),
        r: scenario.spec.responses(),
        n: scenario.n,
        k_max: config.k_max,
        replicates: total,
        counts,
        outcomes,
        failures,
    })
}

/// Runs every cell of the design.
pub fn run_study(config: &StudyConfig, progress: Progress<'_>) -> Result<FrequencyTable> {
    let (scenarios, skipped) = config.cells()?;
    let cells = scenarios
        .iter()
        .map(|s| run_cell(s, config, progress))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyTable {
        config: config.clone(),
        cells,
        skipped,
    })
}
