//! Maximum likelihood estimation by EM with multistart.
//!
//! The E-step accumulates expected initial, transition and response counts
//! from the rescaled forward–backward tables; the M-step turns them into
//! probabilities in closed form.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, LMParameters, Matrix, ModelSpec};
use crate::rng::{substream, DEFAULT_SEED};

/// Expected-occupancy threshold below which an M-step row falls back to uniform.
pub const EMPTY_ROW_THRESHOLD: f64 = 1e-12;

/// Expected complete-data frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCounts {
    /// Sample size `n`.
    pub n: f64,
    /// `b_u^{(1)}`.
    pub initial: Vec<f64>,
    /// `transitions[t - 1]` holds `b_{vu}^{(t)}` (row `v` = from state).
    pub transitions: Vec<Matrix>,
    /// `emissions[t][j]` holds `a_{juy}^{(t)}` (row `u`, column `y`).
    pub emissions: Vec<Vec<Matrix>>,
}

impl ExpectedCounts {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let k = spec.states;
        Self {
            n: 0.0,
            initial: vec![0.0; k],
            transitions: vec![Matrix::zeros(k, k); spec.occasions - 1],
            emissions: (0..spec.occasions)
                .map(|_| spec.categories.iter().map(|&c| Matrix::zeros(k, c)).collect())
                .collect(),
        }
    }

    /// Largest absolute deviation of any margin from `n`.
    pub fn max_margin_error(&self) -> f64 {
        let mut worst = (self.initial.iter().sum::<f64>() - self.n).abs();
        for m in &self.transitions {
            worst = worst.max((m.sum() - self.n).abs());
        }
        for block in &self.emissions {
            for m in block {
                worst = worst.max((m.sum() - self.n).abs());
            }
        }
        worst
    }
}

/// E-step: expected counts under `params`.
pub fn e_step(params: &LMParameters, spec: &ModelSpec, dataset: &Dataset) -> Result<ExpectedCounts> {
    dataset.check(spec)?;
    Ok(accumulate(params, spec, dataset)?.0)
}

/// Expected counts together with `ℓ(params)`; assumes a checked dataset.
fn accumulate(params: &LMParameters, spec: &ModelSpec, dataset: &Dataset) -> Result<(ExpectedCounts, f64)> {
    Engine::new(spec, dataset).accumulate(params)
}

/// E-step workspace for one (spec, dataset) pair, reused across iterations.
///
/// Forward vectors are normalized at every occasion, so the terminal mass is
/// one up to rounding and `ℓ = Σ_t ln c_t`. The backward pass stores
/// `e_t(u) β_t(u) / c_t`, which is also the right factor of the pairwise
/// posterior.
struct Engine<'a> {
    spec: &'a ModelSpec,
    dataset: &'a Dataset,
    k: usize,
    occasions: usize,
    responses: usize,
    /// Pattern-major labels, `occasions * responses` per pattern.
    labels: Vec<u16>,
    weights: Vec<f64>,
    /// Emission probabilities per (block, response), category-major: `[y * k + u]`.
    emission_by_category: Vec<Vec<f64>>,
    emission: Vec<f64>,
    forward: Vec<f64>,
    backward: Vec<f64>,
    right: Vec<f64>,
    scales: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(spec: &'a ModelSpec, dataset: &'a Dataset) -> Self {
        let k = spec.states;
        let occasions = spec.occasions;
        let mut labels = Vec::with_capacity(dataset.distinct() * spec.cells());
        let mut weights = Vec::with_capacity(dataset.distinct());
        for (pattern, freq) in dataset.iter() {
            labels.extend_from_slice(pattern.cells());
            weights.push(freq as f64);
        }
        Self {
            spec,
            dataset,
            k,
            occasions,
            responses: spec.responses(),
            labels,
            weights,
            emission_by_category: Vec::new(),
            emission: vec![0.0; occasions * k],
            forward: vec![0.0; occasions * k],
            backward: vec![0.0; occasions * k],
            right: vec![0.0; occasions * k],
            scales: vec![0.0; occasions],
        }
    }

    fn zero_probability(&self, index: usize) -> Error {
        let (pattern, _) = self.dataset.iter().nth(index).expect("pattern index in range");
        Error::ZeroProbability(pattern.clone())
    }

    fn accumulate(&mut self, params: &LMParameters) -> Result<(ExpectedCounts, f64)> {
        match self.k {
            1 => self.accumulate_fixed::<1>(params),
            2 => self.accumulate_fixed::<2>(params),
            3 => self.accumulate_fixed::<3>(params),
            4 => self.accumulate_fixed::<4>(params),
            5 => self.accumulate_fixed::<5>(params),
            6 => self.accumulate_fixed::<6>(params),
            _ => self.accumulate_any(params),
        }
    }

    /// Same recursions with the state dimension known at compile time.
    fn accumulate_fixed<const K: usize>(&mut self, params: &LMParameters) -> Result<(ExpectedCounts, f64)> {
        let (n_t, r) = (self.occasions, self.responses);
        let homogeneous_emission = params.emissions.len() == 1;
        let cats = &self.spec.categories;
        // emission columns per (block, response, category)
        let mut offsets = Vec::with_capacity(params.emissions.len() * r);
        let mut columns: Vec<[f64; K]> = Vec::new();
        for block in &params.emissions {
            for m in block {
                offsets.push(columns.len());
                for y in 0..m.cols() {
                    columns.push(std::array::from_fn(|u| m.get(u, y)));
                }
            }
        }
        let transitions: Vec<[[f64; K]; K]> = (1..n_t)
            .map(|t| {
                let m = params.transition(t);
                std::array::from_fn(|v| std::array::from_fn(|u| m.get(v, u)))
            })
            .collect();
        let mut initial = [0.0; K];
        initial.copy_from_slice(&params.initial);

        // accumulators: emission counts per (t, j, y) column
        let mut count_offsets = Vec::with_capacity(n_t * r);
        let mut emission_counts: Vec<[f64; K]> = Vec::new();
        for _ in 0..n_t {
            for &c in cats {
                count_offsets.push(emission_counts.len());
                emission_counts.extend(std::iter::repeat_n([0.0; K], c));
            }
        }
        let mut transition_counts = vec![[[0.0; K]; K]; n_t.saturating_sub(1)];
        let mut initial_counts = [0.0; K];
        let mut total = 0.0;

        let mut emission = vec![[0.0; K]; n_t];
        let mut forward = vec![[0.0; K]; n_t];
        let mut backward = vec![[0.0; K]; n_t];
        let mut right = vec![[0.0; K]; n_t];
        let mut scales = vec![0.0; n_t];
        let cells = n_t * r;
        let mut loglik = 0.0;

        for (p, &w) in self.weights.iter().enumerate() {
            let labels = &self.labels[p * cells..(p + 1) * cells];
            for t in 0..n_t {
                let mut e = [1.0; K];
                let block = if homogeneous_emission { 0 } else { t * r };
                for j in 0..r {
                    let col = &columns[offsets[block + j] + labels[t * r + j] as usize];
                    for u in 0..K {
                        e[u] *= col[u];
                    }
                }
                emission[t] = e;
            }

            for t in 0..n_t {
                let mut cur = [0.0; K];
                if t == 0 {
                    for u in 0..K {
                        cur[u] = initial[u] * emission[0][u];
                    }
                } else {
                    let prev = &forward[t - 1];
                    let trans = &transitions[t - 1];
                    for v in 0..K {
                        for u in 0..K {
                            cur[u] += prev[v] * trans[v][u];
                        }
                    }
                    for u in 0..K {
                        cur[u] *= emission[t][u];
                    }
                }
                let c: f64 = cur.iter().sum();
                if !(c > 0.0 && c.is_finite()) {
                    return Err(self.zero_probability(p));
                }
                let inv = 1.0 / c;
                for x in cur.iter_mut() {
                    *x *= inv;
                }
                forward[t] = cur;
                scales[t] = c;
            }

            backward[n_t - 1] = [1.0; K];
            for t in (1..n_t).rev() {
                let inv = 1.0 / scales[t];
                let mut rt = [0.0; K];
                for u in 0..K {
                    rt[u] = emission[t][u] * backward[t][u] * inv;
                }
                right[t] = rt;
                let trans = &transitions[t - 1];
                let mut b = [0.0; K];
                for v in 0..K {
                    let mut acc = 0.0;
                    for u in 0..K {
                        acc += trans[v][u] * rt[u];
                    }
                    b[v] = acc;
                }
                backward[t - 1] = b;
            }

            let mut mass_product = 1.0;
            let mut log_mass = 0.0;
            for &c in &scales {
                mass_product *= c;
                if mass_product < 1e-200 {
                    log_mass += mass_product.ln();
                    mass_product = 1.0;
                }
            }
            let terminal: f64 = forward[n_t - 1].iter().sum();
            loglik += w * (log_mass + (mass_product * terminal).ln());

            let scale = w / terminal;
            total += w;
            for t in 0..n_t {
                let mut g = [0.0; K];
                for u in 0..K {
                    g[u] = scale * forward[t][u] * backward[t][u];
                }
                if t == 0 {
                    for u in 0..K {
                        initial_counts[u] += g[u];
                    }
                }
                for j in 0..r {
                    let acc = &mut emission_counts[count_offsets[t * r + j] + labels[t * r + j] as usize];
                    for u in 0..K {
                        acc[u] += g[u];
                    }
                }
                if t > 0 {
                    let prev = &forward[t - 1];
                    let rt = &right[t];
                    let trans = &transitions[t - 1];
                    let out = &mut transition_counts[t - 1];
                    for v in 0..K {
                        let a = scale * prev[v];
                        for u in 0..K {
                            out[v][u] += a * trans[v][u] * rt[u];
                        }
                    }
                }
            }
        }

        let mut counts = ExpectedCounts::zeros(self.spec);
        counts.n = total;
        counts.initial.copy_from_slice(&initial_counts);
        for (m, b) in counts.transitions.iter_mut().zip(&transition_counts) {
            for v in 0..K {
                m.row_mut(v).copy_from_slice(&b[v]);
            }
        }
        for t in 0..n_t {
            for (j, &c) in cats.iter().enumerate() {
                let base = count_offsets[t * r + j];
                let m = &mut counts.emissions[t][j];
                for y in 0..c {
                    for u in 0..K {
                        m.set(u, y, emission_counts[base + y][u]);
                    }
                }
            }
        }
        Ok((counts, loglik))
    }

    fn accumulate_any(&mut self, params: &LMParameters) -> Result<(ExpectedCounts, f64)> {
        let (k, n_t, r) = (self.k, self.occasions, self.responses);
        let homogeneous_emission = params.emissions.len() == 1;
        self.emission_by_category.clear();
        for block in &params.emissions {
            for m in block {
                let c = m.cols();
                let mut flat = vec![0.0; c * k];
                for u in 0..k {
                    for y in 0..c {
                        flat[y * k + u] = m.get(u, y);
                    }
                }
                self.emission_by_category.push(flat);
            }
        }
        let transitions: Vec<&[f64]> = (1..n_t).map(|t| params.transition(t).as_slice()).collect();

        let mut counts = ExpectedCounts::zeros(self.spec);
        let cells = n_t * r;
        let mut loglik = 0.0;

        for (p, &w) in self.weights.iter().enumerate() {
            let labels = &self.labels[p * cells..(p + 1) * cells];
            let emission = &mut self.emission;
            for t in 0..n_t {
                let row = &mut emission[t * k..(t + 1) * k];
                row.fill(1.0);
                let block = if homogeneous_emission { 0 } else { t * r };
                for j in 0..r {
                    let y = labels[t * r + j] as usize;
                    let col = &self.emission_by_category[block + j][y * k..(y + 1) * k];
                    for (e, &phi) in row.iter_mut().zip(col) {
                        *e *= phi;
                    }
                }
            }

            let forward = &mut self.forward;
            let scales = &mut self.scales;
            for u in 0..k {
                forward[u] = params.initial[u] * emission[u];
            }
            for t in 0..n_t {
                if t > 0 {
                    let (prev, cur) = forward.split_at_mut(t * k);
                    let prev = &prev[(t - 1) * k..];
                    let cur = &mut cur[..k];
                    cur.fill(0.0);
                    let trans = transitions[t - 1];
                    for (v, &a) in prev.iter().enumerate() {
                        for (c, &q) in cur.iter_mut().zip(&trans[v * k..(v + 1) * k]) {
                            *c += a * q;
                        }
                    }
                    for (c, &e) in cur.iter_mut().zip(&emission[t * k..(t + 1) * k]) {
                        *c *= e;
                    }
                }
                let cur = &mut forward[t * k..(t + 1) * k];
                let c: f64 = cur.iter().sum();
                if !(c > 0.0 && c.is_finite()) {
                    return Err(self.zero_probability(p));
                }
                let inv = 1.0 / c;
                cur.iter_mut().for_each(|x| *x *= inv);
                scales[t] = c;
            }

            let backward = &mut self.backward;
            let right = &mut self.right;
            backward[(n_t - 1) * k..].fill(1.0);
            for t in (1..n_t).rev() {
                let inv = 1.0 / scales[t];
                for u in 0..k {
                    right[t * k + u] = emission[t * k + u] * backward[t * k + u] * inv;
                }
                let trans = transitions[t - 1];
                for v in 0..k {
                    let row = &trans[v * k..(v + 1) * k];
                    backward[(t - 1) * k + v] = row.iter().zip(&right[t * k..(t + 1) * k]).map(|(a, b)| a * b).sum();
                }
            }

            let mut mass_product = 1.0;
            let mut log_mass = 0.0;
            for &c in scales.iter() {
                mass_product *= c;
                if mass_product < 1e-200 {
                    log_mass += mass_product.ln();
                    mass_product = 1.0;
                }
            }
            let terminal: f64 = forward[(n_t - 1) * k..].iter().sum();
            loglik += w * (log_mass + (mass_product * terminal).ln());

            let scale = w / terminal;
            counts.n += w;
            for u in 0..k {
                counts.initial[u] += scale * forward[u] * backward[u];
            }
            for t in 0..n_t {
                let f = &forward[t * k..(t + 1) * k];
                let b = &backward[t * k..(t + 1) * k];
                let acc = &mut counts.emissions[t];
                for j in 0..r {
                    let y = labels[t * r + j] as usize;
                    let a = &mut acc[j];
                    let c = a.cols();
                    let data = a.as_mut_slice();
                    for u in 0..k {
                        data[u * c + y] += scale * f[u] * b[u];
                    }
                }
                if t > 0 {
                    let prev = &forward[(t - 1) * k..t * k];
                    let rt = &right[t * k..(t + 1) * k];
                    let trans = transitions[t - 1];
                    let data = counts.transitions[t - 1].as_mut_slice();
                    for v in 0..k {
                        let a = scale * prev[v];
                        let row = &trans[v * k..(v + 1) * k];
                        let out = &mut data[v * k..(v + 1) * k];
                        for u in 0..k {
                            out[u] += a * row[u] * rt[u];
                        }
                    }
                }
            }
        }
        Ok((counts, loglik))
    }
}

/// Result of an M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub params: LMParameters,
    /// Rows whose expected occupancy was below [`EMPTY_ROW_THRESHOLD`] and
    /// were set to uniform.
    pub fallback_rows: usize,
}

fn normalized_row(counts: &[f64], out: &mut [f64], fallbacks: &mut usize) {
    let s: f64 = counts.iter().sum();
    if s < EMPTY_ROW_THRESHOLD {
        *fallbacks += 1;
        out.fill(1.0 / out.len() as f64);
    } else {
        for (o, c) in out.iter_mut().zip(counts) {
            *o = c / s;
        }
    }
}

fn normalized_matrix(counts: &Matrix, fallbacks: &mut usize) -> Matrix {
    let mut out = Matrix::zeros(counts.rows(), counts.cols());
    for i in 0..counts.rows() {
        normalized_row(counts.row(i), out.row_mut(i), fallbacks);
    }
    out
}

fn pooled<'a>(mut it: impl Iterator<Item = &'a Matrix>) -> Matrix {
    let mut acc = it.next().expect("at least one block").clone();
    for m in it {
        acc.add_assign(m);
    }
    acc
}

/// M-step: closed-form maximizer of the expected complete-data log-likelihood.
pub fn m_step(counts: &ExpectedCounts, spec: &ModelSpec) -> MStep {
    let k = spec.states;
    let mut fallbacks = 0;

    let mut initial = vec![0.0; k];
    normalized_row(&counts.initial, &mut initial, &mut fallbacks);

    let transitions = if spec.occasions == 1 {
        Vec::new()
    } else if spec.transition_homogeneous {
        vec![normalized_matrix(&pooled(counts.transitions.iter()), &mut fallbacks)]
    } else {
        counts
            .transitions
            .iter()
            .map(|b| normalized_matrix(b, &mut fallbacks))
            .collect()
    };

    let emissions = if spec.emission_homogeneous {
        vec![(0..spec.responses())
            .map(|j| normalized_matrix(&pooled(counts.emissions.iter().map(|blk| &blk[j])), &mut fallbacks))
            .collect()]
    } else {
        counts
            .emissions
            .iter()
            .map(|blk| blk.iter().map(|a| normalized_matrix(a, &mut fallbacks)).collect())
            .collect()
    };

    MStep {
        params: LMParameters {
            initial,
            transitions,
            emissions,
        },
        fallback_rows: fallbacks,
    }
}

/// EM settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative tolerance on successive log-likelihoods.
    pub tol: f64,
    /// Random starts in addition to the deterministic one.
    pub n_random_starts: usize,
    pub seed: u64,
    /// Run EM even for `k = 1` instead of using the closed form.
    pub force_em: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-8,
            n_random_starts: 4,
            seed: DEFAULT_SEED,
            force_em: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    ClosedForm,
    Deterministic,
    Random,
    Provided,
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: LMParameters,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub n: u64,
    /// Number of M-steps performed by the winning start.
    pub iterations: usize,
    /// `ℓ` at every visited parameter value of the winning start.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub start_index: usize,
    pub start_kind: StartKind,
    /// Uniform-row fallbacks across the winning run.
    pub fallback_rows: usize,
    /// `(start index, reason)` for starts that errored.
    pub failed_starts: Vec<(usize, String)>,
}

impl FitResult {
    /// Largest single-step decrease of the trace (0 for a monotone trace).
    pub fn max_trace_decrease(&self) -> f64 {
        self.trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Uniform initial and transition probabilities; emission rows tilted by a
/// state-dependent amount so that states are distinguishable.
pub fn deterministic_start(spec: &ModelSpec) -> LMParameters {
    let k = spec.states;
    let mut p = LMParameters::uniform(spec);
    for block in &mut p.emissions {
        for (j, m) in block.iter_mut().enumerate() {
            let c = spec.categories[j];
            for u in 0..k {
                let s = if k == 1 { 0.0 } else { 2.0 * u as f64 / (k - 1) as f64 - 1.0 };
                for y in 0..c {
                    let w = (c as f64 - 1.0 - 2.0 * y as f64) / (c as f64 - 1.0);
                    m.set(u, y, (1.0 + 0.2 * s * w) / c as f64);
                }
            }
        }
    }
    p
}

fn random_row<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = rng.random::<f64>() + f64::EPSILON;
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
}

/// Every distribution drawn as independent normalized uniforms.
pub fn random_start<R: Rng>(spec: &ModelSpec, rng: &mut R) -> LMParameters {
    let mut p = LMParameters::uniform(spec);
    random_row(rng, &mut p.initial);
    for m in &mut p.transitions {
        for i in 0..m.rows() {
            random_row(rng, m.row_mut(i));
        }
    }
    for block in &mut p.emissions {
        for m in block {
            for i in 0..m.rows() {
                random_row(rng, m.row_mut(i));
            }
        }
    }
    p
}

struct Run {
    params: LMParameters,
    loglik: f64,
    trace: Vec<f64>,
    converged: bool,
    fallback_rows: usize,
}

fn run_em(start: LMParameters, spec: &ModelSpec, dataset: &Dataset, opts: &FitOptions) -> Result<Run> {
    let mut params = start;
    let mut trace = Vec::new();
    let mut fallback_rows = 0;
    let mut engine = Engine::new(spec, dataset);
    loop {
        let (counts, ll) = engine.accumulate(&params)?;
        if !ll.is_finite() {
            return Err(Error::ZeroProbability(
                dataset.iter().next().map(|(p, _)| p.clone()).unwrap_or(crate::model::Pattern(vec![])),
            ));
        }
        if let Some(&prev) = trace.last() {
            trace.push(ll);
            if (ll - prev).abs() / (1.0 + ll.abs()) < opts.tol {
                return Ok(Run { params, loglik: ll, trace, converged: true, fallback_rows });
            }
        } else {
            trace.push(ll);
        }
        if trace.len() > opts.max_iter {
            return Ok(Run { params, loglik: ll, trace, converged: false, fallback_rows });
        }
        let step = m_step(&counts, spec);
        fallback_rows += step.fallback_rows;
        params = step.params;
    }
}

fn closed_form_single_state(spec: &ModelSpec, dataset: &Dataset) -> Result<Run> {
    let start = LMParameters::uniform(spec);
    let (counts, _) = accumulate(&start, spec, dataset)?;
    let step = m_step(&counts, spec);
    let (_, ll) = accumulate(&step.params, spec, dataset)?;
    Ok(Run {
        params: step.params,
        loglik: ll,
        trace: vec![ll],
        converged: true,
        fallback_rows: step.fallback_rows,
    })
}

/// Fits by EM from one deterministic start plus `n_random_starts` random
/// starts and keeps the highest final log-likelihood (lowest start index on
/// ties). `k = 1` uses the closed form unless `force_em` is set.
pub fn fit(spec: &ModelSpec, dataset: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    fit_from(spec, dataset, opts, None)
}

/// As [`fit`], with an optional caller-supplied parameter set replacing the
/// deterministic start.
pub fn fit_from(
    spec: &ModelSpec,
    dataset: &Dataset,
    opts: &FitOptions,
    provided: Option<&LMParameters>,
) -> Result<FitResult> {
    spec.check()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    dataset.check(spec)?;
    if let Some(p) = provided {
        p.validate(spec)?;
    }
    let n_params = crate::model::count_free_parameters(spec);

    if spec.states == 1 && !opts.force_em {
        let run = closed_form_single_state(spec, dataset)?;
        return Ok(FitResult {
            spec: spec.clone(),
            params: run.params,
            log_likelihood: run.loglik,
            n_params,
            n: dataset.n(),
            iterations: 0,
            trace: run.trace,
            converged: true,
            start_index: 0,
            start_kind: StartKind::ClosedForm,
            fallback_rows: run.fallback_rows,
            failed_starts: Vec::new(),
        });
    }

    let n_starts = 1 + opts.n_random_starts;
    let runs: Vec<(StartKind, Result<Run>)> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let (kind, start) = if i == 0 {
                match provided {
                    Some(p) => (StartKind::Provided, p.clone()),
                    None => (StartKind::Deterministic, deterministic_start(spec)),
                }
            } else {
                let mut rng = substream(opts.seed, "em-start", i as u64);
                (StartKind::Random, random_start(spec, &mut rng))
            };
            (kind, run_em(start, spec, dataset, opts))
        })
        .collect();

    let mut best: Option<(usize, StartKind, Run)> = None;
    let mut failed = Vec::new();
    for (i, (kind, run)) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let better = best.as_ref().is_none_or(|(_, _, b)| run.loglik > b.loglik);
                if better {
                    best = Some((i, kind, run));
                }
            }
            Err(e) => failed.push((i, e.to_string())),
        }
    }
    let (start_index, start_kind, run) = best.ok_or_else(|| Error::AllStartsFailed {
        starts: n_starts,
        reasons: failed
            .iter()
            .map(|(i, e)| format!("start {i}: {e}"))
            .collect::<Vec<_>>()
            .join("; "),
    })?;
    Ok(FitResult {
        spec: spec.clone(),
        params: run.params,
        log_likelihood: run.loglik,
        n_params,
        n: dataset.n(),
        iterations: run.trace.len() - 1,
        trace: run.trace,
        converged: run.converged,
        start_index,
        start_kind,
        fallback_rows: run.fallback_rows,
        failed_starts: failed,
    })
}

/// Relabels states in ascending order of `φ_{1,0|u}` (first response,
/// category 0, first emission block), then ascending `π_u`, then index.
pub fn canonicalize_states(result: &FitResult) -> FitResult {
    let perm = canonical_order(&result.params);
    FitResult {
        params: result.params.permute_states(&perm),
        ..result.clone()
    }
}

/// Permutation `perm` such that new state `i` is old state `perm[i]`.
pub fn canonical_order(params: &LMParameters) -> Vec<usize> {
    let first = &params.emissions[0][0];
    let mut perm: Vec<usize> = (0..params.states()).collect();
    perm.sort_by(|&a, &b| {
        first
            .get(a, 0)
            .total_cmp(&first.get(b, 0))
            .then(params.initial[a].total_cmp(&params.initial[b]))
            .then(a.cmp(&b))
    });
    perm
}
