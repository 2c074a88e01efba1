//! End-to-end runs of the `lmselect` binary.

use std::path::Path;
use std::process::{Command, Output};

use lmselect::criteria::Criterion;
use lmselect::io::{read_dataset_file, read_frequency_csv, read_json, read_values_csv, FitReport, ParamsFile, SelectReportFile};
use lmselect::model::ModelSpec;

fn lmselect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmselect"))
        .args(args)
        .env_remove("LMSELECT_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lmselect(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    lmselect(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_dataset_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    ok(&["simulate", "--scenario", "1", "--r", "1", "--n", "250", "--seed", "1", "--out", s(&data)]);
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 251);
    assert_eq!(text.lines().next(), Some("id,y1_t1,y1_t2,y1_t3,y1_t4,y1_t5"));
    assert_eq!(read_dataset_file(&data, Some(&[2])).unwrap().n(), 250);

    let sidecar: ParamsFile = read_json(&dir.path().join("d.params.json")).unwrap();
    assert_eq!(sidecar.manifest.as_deref(), Some("d.manifest.json"));
    let spec = sidecar.infer_spec(None).unwrap();
    assert_eq!(spec, ModelSpec::binary(2, 5, 1).unwrap());
    let truth = sidecar.to_parameters(&spec).unwrap();
    assert_eq!(truth.transitions[0].to_rows(), vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
    let manifest: serde_json::Value = read_json(&dir.path().join("d.manifest.json")).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    let again = dir.path().join("e.csv");
    ok(&["simulate", "--scenario", "1", "--r", "1", "--n", "250", "--seed", "1", "--out", s(&again)]);
    assert_eq!(std::fs::read(&data).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn simulate_from_a_sidecar_and_refit_recovers_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    ok(&["simulate", "--scenario", "1", "--r", "3", "--n", "500", "--seed", "4", "--out", s(&first)]);
    let data = dir.path().join("b.csv");
    let sidecar = dir.path().join("a.params.json");
    ok(&["simulate", "--params", s(&sidecar), "--n", "500", "--seed", "5", "--out", s(&data)]);

    let fit_out = dir.path().join("fit.json");
    let stdout = ok(&["fit", "--data", s(&data), "--k", "2", "--T", "5", "--seed", "7", "--out", s(&fit_out)]);
    assert!(stdout.contains("loglik="));
    let report: FitReport = read_json(&fit_out).unwrap();
    assert_eq!(report.n_params, 2 * 3 + 1 + 2);
    assert_eq!(report.manifest.as_deref(), Some("fit.manifest.json"));
    let params = report.params.to_parameters(&report.spec).unwrap();
    for j in 0..3 {
        let phi = params.emission(0, j);
        assert!((phi.get(0, 0) - 0.2).abs() < 0.1 && (phi.get(1, 0) - 0.8).abs() < 0.1);
    }

    // fit output doubles as a starting-value file
    let refit = dir.path().join("refit.json");
    let start = dir.path().join("start.json");
    std::fs::write(&start, serde_json::to_string(&report.params).unwrap()).unwrap();
    ok(&["fit", "--data", s(&data), "--k", "2", "--params", s(&start), "--starts", "0", "--out", s(&refit)]);
    let again: FitReport = read_json(&refit).unwrap();
    // a converged fit may still gain up to the relative tolerance
    assert!(again.log_likelihood >= report.log_likelihood - 1e-9);
    assert!((again.log_likelihood - report.log_likelihood) / report.log_likelihood.abs() < 1e-8);
}

#[test]
fn select_writes_consistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    ok(&["simulate", "--scenario", "1", "--r", "3", "--n", "250", "--seed", "3", "--out", s(&data)]);
    let out = dir.path().join("sel.json");
    ok(&["select", "--data", s(&data), "--k-max", "4", "--starts", "2", "--out", s(&out)]);
    let report: SelectReportFile = read_json(&out).unwrap();
    let bic = report.selections.iter().find(|x| x.criterion == Criterion::Bic).unwrap();
    assert_eq!(bic.k, 2);
    let values = read_values_csv(std::fs::File::open(dir.path().join("sel.csv")).unwrap()).unwrap();
    assert_eq!(values, report.values);
    for v in &values {
        let tol = 4.0 * f64::EPSILON * v.icl_bic.abs();
        assert!(((v.icl_bic - v.bic) - 2.0 * v.en).abs() <= tol);
        assert!(((v.caic - v.bic) - v.n_params as f64).abs() <= tol);
    }
    assert_eq!((values[0].en, values[0].nec, values[0].nec1, values[0].nec2), (0.0, 1.0, 1.0, 1.0));

    let single = dir.path().join("one.json");
    ok(&["select", "--data", s(&data), "--k-max", "1", "--out", s(&single)]);
    let report: SelectReportFile = read_json(&single).unwrap();
    assert!(report.selections.iter().all(|x| x.k == 1 && x.boundary));
}

#[test]
fn usage_data_and_numerical_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    ok(&["simulate", "--scenario", "2", "--n", "30", "--out", s(&data)]);
    let out = dir.path().join("o.json");
    assert_eq!(code(&["fit", "--data", s(&data), "--k", "0", "--out", s(&out)]), 2);
    assert_eq!(code(&["simulate", "--scenario", "1", "--n", "0", "--out", s(&out)]), 2);
    assert_eq!(code(&["simulate", "--scenario", "7", "--n", "10", "--out", s(&out)]), 2);
    assert_eq!(code(&["fit", "--data", s(&data), "--k", "2", "--T", "4", "--out", s(&out)]), 2);
    assert_eq!(code(&["bogus"]), 2);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,y1_t1,y1_t2\n1,0,1\n2,1,z\n").unwrap();
    let run = lmselect(&["fit", "--data", s(&bad), "--k", "1", "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(3));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("line 3") && err.contains("column 3"), "{err}");

    std::fs::write(&bad, "id,y1_t1,y1_t2\n1,0,1\n2,1\n").unwrap();
    assert_eq!(code(&["fit", "--data", s(&bad), "--k", "1", "--out", s(&out)]), 3);
    std::fs::write(&bad, "id,y1_t1,y1_t2\n1,0,2\n").unwrap();
    assert_eq!(code(&["fit", "--data", s(&bad), "--k", "1", "--categories", "2", "--out", s(&out)]), 3);

    // a start that gives an observed pattern zero probability, with no other starts
    std::fs::write(&bad, "id,y1_t1,y1_t2\n1,0,1\n2,1,1\n").unwrap();
    let start = dir.path().join("degenerate.json");
    std::fs::write(
        &start,
        r#"{"initial":[1.0,0.0],"transitions":[[1.0,0.0],[0.0,1.0]],"emissions":[[[1.0,0.0],[0.0,1.0]]]}"#,
    )
    .unwrap();
    let args = ["fit", "--data", s(&bad), "--k", "2", "--params", s(&start), "--starts", "0", "--out", s(&out)];
    assert_eq!(code(&args), 4);
}

#[test]
fn seed_comes_from_the_environment_unless_given() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    let run = |out: &Path, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lmselect"));
        cmd.args(["simulate", "--scenario", "1", "--n", "40", "--out", s(out)]);
        cmd.env_remove("LMSELECT_SEED");
        if let Some(e) = env {
            cmd.env("LMSELECT_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(out).unwrap()
    };
    let from_env = run(&a, Some("99"), None);
    let from_flag = run(&b, None, Some("99"));
    let overridden = run(&c, Some("1"), Some("99"));
    assert_eq!(from_env, from_flag);
    assert_eq!(from_flag, overridden);
}

const STUDY: &str = r#"{
  "scenarios": ["1"],
  "r_values": [1, 3],
  "n_values": [250],
  "k_max": 3,
  "replicates": 2,
  "em": { "n_random_starts": 1 },
  "master_seed": 77
}"#;

#[test]
fn replicate_is_byte_deterministic_and_table_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.json");
    std::fs::write(&config, STUDY).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["replicate", "--config", s(&config), "--out", s(&a), "--quiet"]);
    ok(&["replicate", "--config", s(&config), "--out", s(&b), "--quiet"]);
    let name = "frequencies_scenario1_n250.csv";
    let bytes = std::fs::read(a.join(name)).unwrap();
    assert_eq!(bytes, std::fs::read(b.join(name)).unwrap());

    let rows = read_frequency_csv(&bytes[..]).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().map(|r| (r.r, r.k)).collect::<Vec<_>>(), vec![(1, 1), (1, 2), (1, 3), (3, 1), (3, 2), (3, 3)]);
    for r in [1, 3] {
        for c in 0..Criterion::ALL.len() {
            let total: f64 = rows.iter().filter(|x| x.r == r).map(|x| x.frequencies[c]).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
    assert!(String::from_utf8(bytes).unwrap().starts_with("r,k,BIC,AIC,AIC3,CAIC,NEC,NEC1,NEC2,CLC,ICL-BIC\n"));
    let manifest: serde_json::Value = read_json(&a.join("manifest.json")).unwrap();
    assert_eq!(manifest["master_seed"], 77);
    let audit: serde_json::Value = read_json(&a.join("audit.json")).unwrap();
    assert_eq!(audit["manifest"], "manifest.json");
    assert_eq!(audit["table"]["cells"][0]["outcomes"].as_array().unwrap().len(), 2);
}

#[test]
fn single_replicate_tables_hold_only_zeros_and_ones() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.json");
    std::fs::write(&config, STUDY.replace("\"replicates\": 2", "\"replicates\": 1")).unwrap();
    ok(&["replicate", "--config", s(&config), "--out", s(dir.path()), "--quiet"]);
    let rows = read_frequency_csv(std::fs::File::open(dir.path().join("frequencies_scenario1_n250.csv")).unwrap()).unwrap();
    assert!(rows.iter().flat_map(|r| &r.frequencies).all(|&f| f == 0.0 || f == 1.0));
}

#[test]
fn invalid_study_configs_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.json");
    for (body, needle) in [
        (STUDY.replace("\"replicates\": 2", "\"replicates\": 0"), "replicates"),
        (STUDY.replace("\"k_max\": 3", "\"kmax\": 3"), "kmax"),
        (STUDY.replace("[1, 3]", "\"three\""), "r_values"),
    ] {
        std::fs::write(&config, body).unwrap();
        let run = lmselect(&["replicate", "--config", s(&config), "--out", s(dir.path())]);
        assert_eq!(run.status.code(), Some(3));
        let err = String::from_utf8_lossy(&run.stderr);
        assert!(err.contains(needle), "{err}");
    }
}
