//! The `lmselect` command line: `fit`, `select`, `simulate`, `replicate`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
//! Every command writes a `*.manifest.json` next to its outputs.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::criteria::{evaluate_fits, select_k_with, Criterion, SelectionRule};
use crate::em::{canonicalize_states, fit, fit_from, FitOptions};
use crate::error::{Error, Result};
use crate::harness::{run_study, ProgressEvent, StudyConfig};
use crate::io::{
    read_dataset_file, read_json, read_json_config, write_frequency_csv, write_json, write_units, write_values_csv, FitReport,
    ParamsFile, RunManifest, SelectReportFile,
};
use crate::model::{Dataset, ModelSpec};
use crate::rng::DEFAULT_SEED;
use crate::simulate::{draw_units, scenario_preset, Scenario};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lmselect", version, about = "Latent Markov model fitting and state-number selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model with a given number of latent states.
    Fit(FitArgs),
    /// Fit k = 1..k-max and select the number of states by every criterion.
    Select(SelectArgs),
    /// Draw a dataset from a preset scenario or a parameter file.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo study and write frequency tables.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Wide CSV dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of occasions; must match the file when given.
    #[arg(long = "T")]
    pub occasions: Option<usize>,
    /// Number of responses; must match the file when given.
    #[arg(long)]
    pub r: Option<usize>,
    /// Categories per response (comma separated); inferred from the data when omitted.
    #[arg(long, value_delimiter = ',')]
    pub categories: Option<Vec<usize>>,
    /// One transition matrix per occasion instead of a shared one.
    #[arg(long)]
    pub transition_heterogeneous: bool,
    /// One emission matrix per occasion instead of a shared one.
    #[arg(long)]
    pub emission_heterogeneous: bool,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

#[derive(Debug, Args)]
pub struct EmArgs {
    #[arg(long, env = "LMSELECT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Relative convergence tolerance on the log-likelihood.
    #[arg(long, default_value_t = 1e-8, value_parser = positive_f64)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
    /// Random starts in addition to the deterministic one.
    #[arg(long, default_value_t = 4)]
    pub starts: usize,
}

impl EmArgs {
    fn options(&self) -> FitOptions {
        FitOptions {
            max_iter: self.max_iter as usize,
            tol: self.tol,
            n_random_starts: self.starts,
            seed: self.seed,
            force_em: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Number of latent states.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Parameter file used as the deterministic start.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RuleArg {
    FirstIncrease,
    GlobalMinimum,
}

impl From<RuleArg> for SelectionRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::FirstIncrease => SelectionRule::FirstIncrease,
            RuleArg::GlobalMinimum => SelectionRule::GlobalMinimum,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_max: u64,
    #[arg(long, value_enum, default_value_t = RuleArg::FirstIncrease)]
    pub rule: RuleArg,
    /// Output JSON; the per-k table goes next to it with a `.csv` extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset scenario, 1 to 5.
    #[arg(long, required_unless_present = "params", conflicts_with = "params")]
    pub scenario: Option<String>,
    /// Parameter file to simulate from instead of a preset.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Occasions, needed with a parameter file that does not embed a spec.
    #[arg(long = "T")]
    pub occasions: Option<usize>,
    /// Responses for a preset scenario.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub r: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, env = "LMSELECT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Replicate index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    /// Output CSV; true parameters go to `<stem>.params.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// Study configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configuration's master seed.
    #[arg(long, env = "LMSELECT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec(_) | Error::UnknownScenario(_) | Error::InvalidScenario(_) => EXIT_USAGE,
        Error::ZeroProbability(_) | Error::EnumerationCap { .. } | Error::AllStartsFailed { .. } => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// `dir/stem<suffix>` for an output path.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load(args: &DataArgs, k: usize) -> Result<(Dataset, ModelSpec)> {
    let dataset = read_dataset_file(&args.data, args.categories.as_deref())?;
    if let Some(t) = args.occasions {
        if t != dataset.occasions() {
            return Err(Error::InvalidSpec(format!("--T {t} but the file has {} occasions", dataset.occasions())));
        }
    }
    if let Some(r) = args.r {
        if r != dataset.responses() {
            return Err(Error::InvalidSpec(format!("--r {r} but the file has {} responses", dataset.responses())));
        }
    }
    let categories = args.categories.clone().unwrap_or_else(|| dataset.inferred_categories());
    let spec = ModelSpec::new(k, dataset.occasions(), categories)?
        .with_transition_homogeneous(!args.transition_heterogeneous)
        .with_emission_homogeneous(!args.emission_heterogeneous);
    spec.check()?;
    Ok((dataset, spec))
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let k = args.k as usize;
    let (dataset, spec) = load(&args.data, k)?;
    let manifest_path = companion(&args.out, ".manifest.json");
    let manifest = RunManifest::start(
        "fit",
        serde_json::json!({
            "data": display(&args.data.data),
            "spec": spec,
            "em": args.em.options(),
            "params": args.params.as_deref().map(display),
        }),
        args.em.seed,
    );
    let opts = args.em.options();
    let result = match &args.params {
        Some(p) => {
            let file: ParamsFile = read_json(p)?;
            let start = file.to_parameters(&spec)?;
            fit_from(&spec, &dataset, &opts, Some(&start))?
        }
        None => fit(&spec, &dataset, &opts)?,
    };
    let result = canonicalize_states(&result);
    write_json(&args.out, &FitReport::new(&result, Some(file_name(&manifest_path))))?;
    write_json(&manifest_path, &manifest.finish(vec![display(&args.out)]))?;
    println!(
        "k={} loglik={} n_params={} iterations={} converged={}",
        k, result.log_likelihood, result.n_params, result.iterations, result.converged
    );
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let k_max = args.k_max as usize;
    let (dataset, spec) = load(&args.data, 1)?;
    let opts = args.em.options();
    let rule = SelectionRule::from(args.rule);
    let manifest_path = companion(&args.out, ".manifest.json");
    let csv_path = args.out.with_extension("csv");
    let manifest = RunManifest::start(
        "select",
        serde_json::json!({
            "data": display(&args.data.data),
            "spec": spec,
            "k_max": k_max,
            "rule": rule,
            "em": opts,
        }),
        args.em.seed,
    );
    let fits = (1..=k_max)
        .map(|k| fit(&spec.with_states(k), &dataset, &opts))
        .collect::<Result<Vec<_>>>()?;
    let values = evaluate_fits(&fits, &dataset)?;
    let report = select_k_with(&values, rule)?;
    write_values_csv(std::io::BufWriter::new(std::fs::File::create(&csv_path)?), &values)?;
    write_json(&args.out, &SelectReportFile::new(&report, Some(file_name(&manifest_path))))?;
    write_json(&manifest_path, &manifest.finish(vec![display(&args.out), display(&csv_path)]))?;
    for s in &report.selections {
        println!(
            "{:8} k={}{}",
            s.criterion.name(),
            s.k,
            if s.boundary { " (boundary)" } else { "" }
        );
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let n = args.n as usize;
    let scenario = match (&args.scenario, &args.params) {
        (Some(name), _) => scenario_preset(name, args.r as usize, n)?,
        (None, Some(p)) => {
            let file: ParamsFile = read_json(p)?;
            let spec = file.infer_spec(args.occasions)?;
            let params = file.to_parameters(&spec)?;
            Scenario::new("custom", spec, params, n)?
        }
        (None, None) => return Err(Error::InvalidSpec("either --scenario or --params is required".into())),
    }
    .with_seed(args.seed);
    let sidecar = companion(&args.out, ".params.json");
    let manifest_path = companion(&args.out, ".manifest.json");
    let manifest = RunManifest::start(
        "simulate",
        serde_json::json!({
            "scenario": scenario.name,
            "params": args.params.as_deref().map(display),
            "spec": scenario.spec,
            "n": n,
            "replicate": args.replicate,
        }),
        args.seed,
    );
    let units = draw_units(&scenario, args.replicate);
    write_units(
        std::io::BufWriter::new(std::fs::File::create(&args.out)?),
        scenario.spec.responses(),
        scenario.spec.occasions,
        &units,
    )?;
    let mut params = ParamsFile::from_parameters(&scenario.params, Some(&scenario.spec));
    params.manifest = Some(file_name(&manifest_path));
    write_json(&sidecar, &params)?;
    write_json(&manifest_path, &manifest.finish(vec![display(&args.out), display(&sidecar)]))?;
    println!("wrote {} units to {}", units.len(), display(&args.out));
    Ok(())
}

/// File name of the frequency table for one (scenario, n).
pub fn frequency_file_name(scenario: &str, n: usize) -> String {
    format!("frequencies_{scenario}_n{n}.csv")
}

fn cmd_replicate(args: &ReplicateArgs) -> Result<()> {
    let mut config: StudyConfig = read_json_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    config.check()?;
    std::fs::create_dir_all(&args.out)?;
    let manifest = RunManifest::start("replicate", serde_json::to_value(&config)?, config.master_seed);
    let quiet = args.quiet;
    let progress = move |e: &ProgressEvent| {
        if quiet {
            return;
        }
        match e {
            ProgressEvent::CellStarted { label, replicates } => eprintln!("{label}: {replicates} replicates"),
            ProgressEvent::CellFinished { label, failures } => eprintln!("{label}: done, {failures} failed"),
            ProgressEvent::ReplicateFinished { .. } => {}
        }
    };
    let table = run_study(&config, Some(&progress))?;
    for s in &table.skipped {
        eprintln!("skipped {s}");
    }

    let mut outputs = Vec::new();
    let mut groups: Vec<(String, usize)> = Vec::new();
    for c in &table.cells {
        if !groups.contains(&(c.scenario.clone(), c.n)) {
            groups.push((c.scenario.clone(), c.n));
        }
    }
    for (scenario, n) in &groups {
        let cells: Vec<_> = table.cells.iter().filter(|c| &c.scenario == scenario && c.n == *n).collect();
        let path = args.out.join(frequency_file_name(scenario, *n));
        write_frequency_csv(std::io::BufWriter::new(std::fs::File::create(&path)?), &cells)?;
        outputs.push(display(&path));
        if !quiet {
            print_table(scenario, *n, &cells);
        }
    }
    let audit_path = args.out.join("audit.json");
    write_json(
        &audit_path,
        &serde_json::json!({ "manifest": "manifest.json", "table": table }),
    )?;
    outputs.push(display(&audit_path));
    write_json(&args.out.join("manifest.json"), &manifest.finish(outputs))?;
    if table.failures() > 0 {
        eprintln!("warning: {} replicates failed and were excluded", table.failures());
    }
    Ok(())
}

fn print_table(scenario: &str, n: usize, cells: &[&crate::harness::CellResult]) {
    println!("{scenario}, n = {n}");
    print!("{:>3} {:>2}", "r", "k");
    for c in Criterion::ALL {
        print!(" {:>7}", c.name());
    }
    println!();
    for cell in cells {
        for k in 1..=cell.k_max {
            print!("{:>3} {:>2}", cell.r, k);
            for c in Criterion::ALL {
                print!(" {:>7.2}", cell.frequency(c, k));
            }
            println!();
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Select(a) => cmd_select(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Replicate(a) => cmd_replicate(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
