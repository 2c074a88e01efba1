//! File formats: wide CSV datasets, parameter JSON, fit and selection
//! reports, frequency tables and run manifests.
//!
//! Dataset header: `id,y1_t1,…,y1_tT,y2_t1,…,yr_tT` (response-major), labels
//! 0-based, LF line endings. CSV floats use the shortest representation that
//! parses back to the same `f64`, so every emitted file reads back exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::criteria::{Criterion, CriterionValues, Selection, SelectionReport, SelectionRule};
use crate::em::{FitResult, StartKind};
use crate::error::{Error, Result};
use crate::harness::CellResult;
use crate::model::{Dataset, LMParameters, Matrix, ModelSpec, Pattern};

/// Canonical dataset header for `r` responses and `T` occasions.
pub fn dataset_header(responses: usize, occasions: usize) -> Vec<String> {
    let mut h = vec!["id".to_string()];
    for j in 1..=responses {
        for t in 1..=occasions {
            h.push(format!("y{j}_t{t}"));
        }
    }
    h
}

fn parse_cell_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix('y')?;
    let (j, t) = rest.split_once("_t")?;
    Some((j.parse().ok()?, t.parse().ok()?))
}

fn malformed(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::MalformedData {
        line,
        column,
        message: message.into(),
    }
}

/// Reads a wide CSV dataset. With `categories`, labels are range-checked
/// per response and offending cells are reported by line and column.
pub fn read_dataset<R: Read>(reader: R, categories: Option<&[usize]>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(malformed(1, 1, "empty file: expected a header row")),
    };
    if header.get(0) != Some("id") {
        return Err(malformed(1, 1, "first header field must be `id`"));
    }
    let mut responses = 0;
    let mut occasions = 0;
    for (i, name) in header.iter().enumerate().skip(1) {
        let (j, t) = parse_cell_name(name)
            .ok_or_else(|| malformed(1, i + 1, format!("`{name}` is not of the form y<j>_t<t>")))?;
        responses = responses.max(j);
        occasions = occasions.max(t);
    }
    if responses == 0 || occasions == 0 {
        return Err(malformed(1, 2, "header has no response columns"));
    }
    let expected = dataset_header(responses, occasions);
    for (i, want) in expected.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == want => {}
            got => {
                return Err(malformed(
                    1,
                    i + 1,
                    format!("expected `{want}`, found `{}`", got.unwrap_or("")),
                ))
            }
        }
    }
    if header.len() != expected.len() {
        return Err(malformed(1, expected.len() + 1, "unexpected extra header field"));
    }
    if let Some(c) = categories {
        if c.len() != responses {
            return Err(Error::InvalidSpec(format!(
                "{} category counts given for {responses} responses",
                c.len()
            )));
        }
    }

    let mut dataset = Dataset::new(responses, occasions);
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != expected.len() {
            return Err(malformed(
                line,
                record.len().min(expected.len()) + 1,
                format!("expected {} fields, found {}", expected.len(), record.len()),
            ));
        }
        let mut cells = vec![0u16; responses * occasions];
        for (i, field) in record.iter().enumerate().skip(1) {
            let j = (i - 1) / occasions;
            let t = (i - 1) % occasions;
            let label: u16 = field
                .trim()
                .parse()
                .map_err(|_| malformed(line, i + 1, format!("`{field}` is not a category label")))?;
            if let Some(c) = categories {
                if label as usize >= c[j] {
                    return Err(malformed(
                        line,
                        i + 1,
                        format!("label {label} out of range for response {} with {} categories", j + 1, c[j]),
                    ));
                }
            }
            cells[t * responses + j] = label;
        }
        dataset.add(Pattern(cells), 1)?;
    }
    Ok(dataset)
}

pub fn read_dataset_file(path: &Path, categories: Option<&[usize]>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?), categories)
}

/// Writes units in the given order with ids `1..=n`.
pub fn write_units<'a, W: Write>(
    writer: W,
    responses: usize,
    occasions: usize,
    units: impl IntoIterator<Item = &'a Pattern>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(dataset_header(responses, occasions))?;
    let mut row = Vec::with_capacity(1 + responses * occasions);
    for (id, unit) in units.into_iter().enumerate() {
        if unit.0.len() != responses * occasions {
            return Err(Error::PatternShape {
                expected: responses * occasions,
                got: unit.0.len(),
            });
        }
        row.clear();
        row.push((id + 1).to_string());
        for j in 0..responses {
            for t in 0..occasions {
                row.push(unit.label(responses, t, j).to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a dataset one unit per row, patterns in sorted order.
pub fn write_dataset<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    write_units(writer, dataset.responses(), dataset.occasions(), dataset.units())
}

/// Transition section: one matrix, or one per occasion `2..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionsJson {
    Shared(Vec<Vec<f64>>),
    PerOccasion(Vec<Vec<Vec<f64>>>),
}

/// Emission section: per response, per state rows; or that, per occasion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmissionsJson {
    Shared(Vec<Vec<Vec<f64>>>),
    PerOccasion(Vec<Vec<Vec<Vec<f64>>>>),
}

/// Parameter file. `spec` is optional; when present it fixes `T` and the
/// homogeneity layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
    pub initial: Vec<f64>,
    pub transitions: TransitionsJson,
    pub emissions: EmissionsJson,
}

impl ParamsFile {
    pub fn from_parameters(params: &LMParameters, spec: Option<&ModelSpec>) -> Self {
        let transitions = if params.transitions.len() == 1 || params.transitions.is_empty() {
            TransitionsJson::Shared(params.transitions.first().map(Matrix::to_rows).unwrap_or_default())
        } else {
            TransitionsJson::PerOccasion(params.transitions.iter().map(Matrix::to_rows).collect())
        };
        let block = |b: &Vec<Matrix>| b.iter().map(Matrix::to_rows).collect::<Vec<_>>();
        let emissions = if params.emissions.len() == 1 {
            EmissionsJson::Shared(block(&params.emissions[0]))
        } else {
            EmissionsJson::PerOccasion(params.emissions.iter().map(block).collect())
        };
        Self {
            manifest: None,
            spec: spec.cloned(),
            initial: params.initial.clone(),
            transitions,
            emissions,
        }
    }

    /// The embedded spec, or one inferred from the shapes with `occasions`.
    pub fn infer_spec(&self, occasions: Option<usize>) -> Result<ModelSpec> {
        if let Some(s) = &self.spec {
            if let Some(t) = occasions {
                if t != s.occasions {
                    return Err(Error::InvalidSpec(format!(
                        "parameter file is for T={}, requested T={t}",
                        s.occasions
                    )));
                }
            }
            return Ok(s.clone());
        }
        let (first, emission_homogeneous) = match &self.emissions {
            EmissionsJson::Shared(b) => (b, true),
            EmissionsJson::PerOccasion(blocks) => (
                blocks
                    .first()
                    .ok_or_else(|| Error::InvalidSpec("emissions: no occasion blocks".into()))?,
                false,
            ),
        };
        let categories = first.iter().map(|m| m.first().map_or(0, Vec::len)).collect();
        let occasions = match (&self.transitions, &self.emissions, occasions) {
            (_, _, Some(t)) => t,
            (TransitionsJson::PerOccasion(b), _, None) => b.len() + 1,
            (_, EmissionsJson::PerOccasion(b), None) => b.len(),
            (TransitionsJson::Shared(m), _, None) if m.is_empty() => 1,
            _ => {
                return Err(Error::InvalidSpec(
                    "the number of occasions cannot be inferred from homogeneous parameters".into(),
                ))
            }
        };
        let transition_homogeneous = !matches!(self.transitions, TransitionsJson::PerOccasion(_));
        let spec = ModelSpec::new(self.initial.len(), occasions, categories)?
            .with_transition_homogeneous(transition_homogeneous)
            .with_emission_homogeneous(emission_homogeneous);
        spec.check()?;
        Ok(spec)
    }

    /// Validated parameters for `spec`.
    pub fn to_parameters(&self, spec: &ModelSpec) -> Result<LMParameters> {
        let transitions = match &self.transitions {
            TransitionsJson::Shared(m) if m.is_empty() => Vec::new(),
            TransitionsJson::Shared(m) => vec![Matrix::from_rows(m.clone())?],
            TransitionsJson::PerOccasion(b) => b
                .iter()
                .map(|m| Matrix::from_rows(m.clone()))
                .collect::<Result<_>>()?,
        };
        let block = |b: &Vec<Vec<Vec<f64>>>| b.iter().map(|m| Matrix::from_rows(m.clone())).collect::<Result<Vec<_>>>();
        let emissions = match &self.emissions {
            EmissionsJson::Shared(b) => vec![block(b)?],
            EmissionsJson::PerOccasion(blocks) => blocks.iter().map(block).collect::<Result<_>>()?,
        };
        let params = LMParameters {
            initial: self.initial.clone(),
            transitions,
            emissions,
        };
        params.validate(spec)?;
        Ok(params)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// As [`read_json`], with the offending field path in error messages.
pub fn read_json_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::InvalidConfig(format!("{}: field `{field}`: {}", path.display(), e.into_inner()))
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// JSON form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    pub spec: ModelSpec,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub n: u64,
    pub iterations: usize,
    pub converged: bool,
    pub start_index: usize,
    pub start_kind: StartKind,
    pub fallback_rows: usize,
    pub failed_starts: Vec<(usize, String)>,
    pub trace: Vec<f64>,
    pub params: ParamsFile,
}

impl FitReport {
    pub fn new(fit: &FitResult, manifest: Option<String>) -> Self {
        Self {
            manifest,
            spec: fit.spec.clone(),
            log_likelihood: fit.log_likelihood,
            n_params: fit.n_params,
            n: fit.n,
            iterations: fit.iterations,
            converged: fit.converged,
            start_index: fit.start_index,
            start_kind: fit.start_kind,
            fallback_rows: fit.fallback_rows,
            failed_starts: fit.failed_starts.clone(),
            trace: fit.trace.clone(),
            params: ParamsFile::from_parameters(&fit.params, Some(&fit.spec)),
        }
    }
}

/// JSON form of a selection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReportFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    pub rule: SelectionRule,
    pub k_min: usize,
    pub k_max: usize,
    pub values: Vec<CriterionValues>,
    pub selections: Vec<Selection>,
}

impl SelectReportFile {
    pub fn new(report: &SelectionReport, manifest: Option<String>) -> Self {
        Self {
            manifest,
            rule: report.rule,
            k_min: report.k_min,
            k_max: report.k_max,
            values: report.values.clone(),
            selections: report.selections.clone(),
        }
    }
}

/// Serde adapter writing non-finite floats as the strings `inf`, `-inf`, `NaN`.
pub mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Columns of the per-k selection CSV.
pub const VALUES_HEADER: [&str; 16] = [
    "k", "loglik", "n_params", "n", "EN", "EN1", "EN2", "AIC", "BIC", "AIC3", "CAIC", "NEC", "NEC1", "NEC2", "CLC",
    "ICL-BIC",
];

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

/// One row per `k` with every criterion value at full precision.
pub fn write_values_csv<W: Write>(writer: W, values: &[CriterionValues]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(VALUES_HEADER)?;
    for v in values {
        let mut row = vec![v.k.to_string(), v.loglik.to_string(), v.n_params.to_string(), v.n.to_string()];
        row.extend([v.en, v.en1, v.en2].map(|x| x.to_string()));
        row.extend([v.aic, v.bic, v.aic3, v.caic, v.nec, v.nec1, v.nec2, v.clc, v.icl_bic].map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_values_csv<R: Read>(reader: R) -> Result<Vec<CriterionValues>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(VALUES_HEADER.iter().copied()) {
        return Err(malformed(1, 1, "unexpected header for a criterion table"));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != VALUES_HEADER.len() {
            return Err(malformed(line, record.len() + 1, "wrong number of fields"));
        }
        let f = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| malformed(line, i + 1, format!("`{}` is not a number", &record[i])))
        };
        let u = |i: usize| -> Result<u64> {
            record[i]
                .parse()
                .map_err(|_| malformed(line, i + 1, format!("`{}` is not an integer", &record[i])))
        };
        let nec = f(11)?;
        out.push(CriterionValues {
            k: u(0)? as usize,
            loglik: f(1)?,
            n_params: u(2)? as usize,
            n: u(3)?,
            en: f(4)?,
            en1: f(5)?,
            en2: f(6)?,
            aic: f(7)?,
            bic: f(8)?,
            aic3: f(9)?,
            caic: f(10)?,
            nec,
            nec1: f(12)?,
            nec2: f(13)?,
            clc: f(14)?,
            icl_bic: f(15)?,
            degenerate_nec: nec.is_infinite(),
        });
    }
    Ok(out)
}

/// Header of a frequency table.
pub fn frequency_header() -> Vec<String> {
    let mut h = vec!["r".to_string(), "k".to_string()];
    h.extend(Criterion::ALL.iter().map(|c| c.name().to_string()));
    h
}

/// Frequency table for cells sharing a scenario and `n`: one block of `k`
/// rows per `r`, one column per criterion.
pub fn write_frequency_csv<W: Write>(writer: W, cells: &[&CellResult]) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(frequency_header())?;
    for cell in cells {
        for k in 1..=cell.k_max {
            let mut row = vec![cell.r.to_string(), k.to_string()];
            row.extend(Criterion::ALL.iter().map(|&c| cell.frequency(c, k).to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One parsed frequency row.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRow {
    pub r: usize,
    pub k: usize,
    /// In [`Criterion::ALL`] order.
    pub frequencies: Vec<f64>,
}

pub fn read_frequency_csv<R: Read>(reader: R) -> Result<Vec<FrequencyRow>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    if rdr.headers()?.iter().ne(frequency_header().iter().map(String::as_str)) {
        return Err(malformed(1, 1, "unexpected header for a frequency table"));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed(line, i + 1, "expected a number"))
        };
        out.push(FrequencyRow {
            r: parse(0)? as usize,
            k: parse(1)? as usize,
            frequencies: (2..2 + Criterion::ALL.len()).map(parse).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub master_seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value, master_seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            started_unix: unix_now(),
            finished_unix: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn finish(mut self, outputs: Vec<String>) -> Self {
        self.outputs = outputs;
        self.finished_unix = unix_now();
        self
    }
}
