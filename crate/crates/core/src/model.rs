//! Model structure, parameter containers and response-pattern datasets.
//!
//! Conventions used throughout the crate:
//! * states, occasions and responses are 0-based indices;
//! * transition matrices are `k × k` with rows indexed by the *from* state;
//! * emission matrices are `k × c_j` with rows indexed by state and columns by category;
//! * a [`Pattern`] stores the `r × T` response configuration occasion-major,
//!   i.e. cell `t * r + j` holds the label of response `j` at occasion `t`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance for every "sums to one" check.
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Dense row-major matrix of probabilities. Serialized as an array of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    /// Matrix whose rows are all the uniform distribution over `cols` entries.
    pub fn uniform_rows(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0 / cols as f64)
    }

    /// Builds a matrix from explicit rows; fails on ragged input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::InvalidSpec(format!(
                "ragged matrix: row {bad} has {} entries, row 0 has {n_cols}",
                rows[bad].len()
            )));
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] += value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Structural description of a latent Markov model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Number of latent states `k`.
    pub states: usize,
    /// Number of time occasions `T`.
    pub occasions: usize,
    /// Category count `c_j` of every response variable; labels run `0..c_j`.
    pub categories: Vec<usize>,
    #[serde(default = "default_true")]
    pub transition_homogeneous: bool,
    #[serde(default = "default_true")]
    pub emission_homogeneous: bool,
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    /// Time-homogeneous model, the default used by every simulation preset.
    pub fn new(states: usize, occasions: usize, categories: Vec<usize>) -> Result<Self> {
        let spec = Self {
            states,
            occasions,
            categories,
            transition_homogeneous: true,
            emission_homogeneous: true,
        };
        spec.check()?;
        Ok(spec)
    }

    /// `r` binary responses.
    pub fn binary(states: usize, occasions: usize, responses: usize) -> Result<Self> {
        Self::new(states, occasions, vec![2; responses])
    }

    pub fn with_transition_homogeneous(mut self, yes: bool) -> Self {
        self.transition_homogeneous = yes;
        self
    }

    pub fn with_emission_homogeneous(mut self, yes: bool) -> Self {
        self.emission_homogeneous = yes;
        self
    }

    /// Same structure with a different number of latent states.
    pub fn with_states(&self, states: usize) -> Self {
        Self {
            states,
            ..self.clone()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.states == 0 {
            return Err(Error::InvalidSpec("k must be at least 1".into()));
        }
        if self.occasions == 0 {
            return Err(Error::InvalidSpec("T must be at least 1".into()));
        }
        if self.categories.is_empty() {
            return Err(Error::InvalidSpec("at least one response variable is required".into()));
        }
        if let Some(j) = self.categories.iter().position(|&c| c < 2) {
            return Err(Error::InvalidSpec(format!(
                "response {j} has {} categories, at least 2 required",
                self.categories[j]
            )));
        }
        Ok(())
    }

    pub fn responses(&self) -> usize {
        self.categories.len()
    }

    /// Number of cells `r · T` in a response pattern.
    pub fn cells(&self) -> usize {
        self.responses() * self.occasions
    }

    pub fn transition_blocks(&self) -> usize {
        match (self.occasions, self.transition_homogeneous) {
            (1, _) => 0,
            (_, true) => 1,
            (t, false) => t - 1,
        }
    }

    pub fn emission_blocks(&self) -> usize {
        if self.emission_homogeneous {
            1
        } else {
            self.occasions
        }
    }

    /// Number of latent configurations `k^T`, saturating at `u128::MAX`.
    pub fn latent_configurations(&self) -> u128 {
        (self.states as u128)
            .checked_pow(self.occasions as u32)
            .unwrap_or(u128::MAX)
    }
}

/// Number of free parameters of the model (`#par` in every criterion).
///
/// Emission term `k Σ_j (c_j − 1)` (times `T` when emissions vary over time),
/// initial term `k − 1`, transition term `k (k − 1)` per transition block.
pub fn count_free_parameters(spec: &ModelSpec) -> usize {
    let k = spec.states;
    let per_state: usize = spec.categories.iter().map(|c| c - 1).sum();
    let emission = k * per_state * spec.emission_blocks();
    let initial = k - 1;
    let transition = spec.transition_blocks() * k * (k - 1);
    emission + initial + transition
}

/// A single invariant violation reported by [`LMParameters::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    InitialLength { expected: usize, got: usize },
    InitialSum { sum: f64 },
    InitialEntry { state: usize, value: f64 },
    TransitionBlocks { expected: usize, got: usize },
    TransitionShape { block: usize, rows: usize, cols: usize },
    TransitionEntry { block: usize, row: usize, col: usize, value: f64 },
    TransitionRowSum { block: usize, row: usize, sum: f64 },
    EmissionBlocks { expected: usize, got: usize },
    EmissionResponses { block: usize, expected: usize, got: usize },
    EmissionShape { block: usize, response: usize, rows: usize, cols: usize },
    EmissionEntry { block: usize, response: usize, state: usize, category: usize, value: f64 },
    EmissionRowSum { block: usize, response: usize, state: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            InitialLength { expected, got } => write!(f, "initial has length {got}, expected {expected}"),
            InitialSum { sum } => write!(f, "initial row sum {sum}"),
            InitialEntry { state, value } => write!(f, "initial[{state}] = {value} outside [0,1]"),
            TransitionBlocks { expected, got } => {
                write!(f, "{got} transition matrices, expected {expected}")
            }
            TransitionShape { block, rows, cols } => {
                write!(f, "transition block {block} has shape {rows}x{cols}")
            }
            TransitionEntry { block, row, col, value } => {
                write!(f, "transition block {block} entry ({row},{col}) = {value} outside [0,1]")
            }
            TransitionRowSum { block, row, sum } => {
                write!(f, "transition block {block} row {row} sum {sum}")
            }
            EmissionBlocks { expected, got } => {
                write!(f, "{got} emission blocks, expected {expected}")
            }
            EmissionResponses { block, expected, got } => {
                write!(f, "emission block {block} has {got} responses, expected {expected}")
            }
            EmissionShape { block, response, rows, cols } => write!(
                f,
                "emission block {block} response {response} has shape {rows}x{cols}"
            ),
            EmissionEntry { block, response, state, category, value } => write!(
                f,
                "emission block {block} response {response} entry ({state},{category}) = {value} outside [0,1]"
            ),
            EmissionRowSum { block, response, state, sum } => write!(
                f,
                "emission block {block} response {response} row {state} sum {sum}"
            ),
        }
    }
}

/// Initial, transition and conditional response probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LMParameters {
    /// `π_u`, length `k`.
    pub initial: Vec<f64>,
    /// One `k × k` matrix when homogeneous, else one per occasion `t = 2..T`.
    pub transitions: Vec<Matrix>,
    /// `emissions[block][j]` is the `k × c_j` matrix of response `j`; a single
    /// block when homogeneous, else one per occasion.
    pub emissions: Vec<Vec<Matrix>>,
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl LMParameters {
    /// Uniform distributions everywhere.
    pub fn uniform(spec: &ModelSpec) -> Self {
        let k = spec.states;
        let emissions = (0..spec.emission_blocks())
            .map(|_| {
                spec.categories
                    .iter()
                    .map(|&c| Matrix::uniform_rows(k, c))
                    .collect()
            })
            .collect();
        Self {
            initial: vec![1.0 / k as f64; k],
            transitions: vec![Matrix::uniform_rows(k, k); spec.transition_blocks()],
            emissions,
        }
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }

    /// Transition matrix governing the move into occasion `t` (0-based, `t ≥ 1`).
    #[inline]
    pub fn transition(&self, t: usize) -> &Matrix {
        if self.transitions.len() == 1 {
            &self.transitions[0]
        } else {
            &self.transitions[t - 1]
        }
    }

    /// Emission matrix of response `j` at occasion `t` (0-based).
    #[inline]
    pub fn emission(&self, t: usize, j: usize) -> &Matrix {
        if self.emissions.len() == 1 {
            &self.emissions[0][j]
        } else {
            &self.emissions[t][j]
        }
    }

    /// All invariant violations against `spec`; empty means valid.
    pub fn violations(&self, spec: &ModelSpec) -> Vec<Violation> {
        let k = spec.states;
        let mut out = Vec::new();

        if self.initial.len() != k {
            out.push(Violation::InitialLength {
                expected: k,
                got: self.initial.len(),
            });
        } else {
            for (state, &value) in self.initial.iter().enumerate() {
                if !in_unit(value) {
                    out.push(Violation::InitialEntry { state, value });
                }
            }
            let sum: f64 = self.initial.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                out.push(Violation::InitialSum { sum });
            }
        }

        if self.transitions.len() != spec.transition_blocks() {
            out.push(Violation::TransitionBlocks {
                expected: spec.transition_blocks(),
                got: self.transitions.len(),
            });
        }
        for (block, m) in self.transitions.iter().enumerate() {
            if m.rows() != k || m.cols() != k {
                out.push(Violation::TransitionShape {
                    block,
                    rows: m.rows(),
                    cols: m.cols(),
                });
                continue;
            }
            for row in 0..k {
                for col in 0..k {
                    let value = m.get(row, col);
                    if !in_unit(value) {
                        out.push(Violation::TransitionEntry { block, row, col, value });
                    }
                }
                let sum: f64 = m.row(row).iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    out.push(Violation::TransitionRowSum { block, row, sum });
                }
            }
        }

        if self.emissions.len() != spec.emission_blocks() {
            out.push(Violation::EmissionBlocks {
                expected: spec.emission_blocks(),
                got: self.emissions.len(),
            });
        }
        for (block, per_response) in self.emissions.iter().enumerate() {
            if per_response.len() != spec.responses() {
                out.push(Violation::EmissionResponses {
                    block,
                    expected: spec.responses(),
                    got: per_response.len(),
                });
                continue;
            }
            for (response, m) in per_response.iter().enumerate() {
                let c = spec.categories[response];
                if m.rows() != k || m.cols() != c {
                    out.push(Violation::EmissionShape {
                        block,
                        response,
                        rows: m.rows(),
                        cols: m.cols(),
                    });
                    continue;
                }
                for state in 0..k {
                    for category in 0..c {
                        let value = m.get(state, category);
                        if !in_unit(value) {
                            out.push(Violation::EmissionEntry {
                                block,
                                response,
                                state,
                                category,
                                value,
                            });
                        }
                    }
                    let sum: f64 = m.row(state).iter().sum();
                    if (sum - 1.0).abs() > STOCHASTIC_TOL {
                        out.push(Violation::EmissionRowSum {
                            block,
                            response,
                            state,
                            sum,
                        });
                    }
                }
            }
        }
        out
    }

    /// `Ok(())` when [`violations`](Self::violations) is empty.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let v = self.violations(spec);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(v))
        }
    }

    /// Relabels states so that new state `i` is old state `perm[i]`.
    pub fn permute_states(&self, perm: &[usize]) -> Self {
        let k = self.states();
        assert_eq!(perm.len(), k, "permutation length must equal k");
        let initial = perm.iter().map(|&p| self.initial[p]).collect();
        let transitions = self
            .transitions
            .iter()
            .map(|m| {
                let mut out = Matrix::zeros(k, k);
                for i in 0..k {
                    for j in 0..k {
                        out.set(i, j, m.get(perm[i], perm[j]));
                    }
                }
                out
            })
            .collect();
        let emissions = self
            .emissions
            .iter()
            .map(|block| {
                block
                    .iter()
                    .map(|m| {
                        let mut out = Matrix::zeros(k, m.cols());
                        for i in 0..k {
                            out.row_mut(i).copy_from_slice(m.row(perm[i]));
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        Self {
            initial,
            transitions,
            emissions,
        }
    }
}

/// One full `r × T` response configuration, stored occasion-major.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pattern(pub Vec<u16>);

impl Pattern {
    /// Builds a pattern from per-occasion response vectors.
    pub fn from_occasions(occasions: &[Vec<u16>]) -> Self {
        Self(occasions.iter().flatten().copied().collect())
    }

    #[inline]
    pub fn label(&self, responses: usize, t: usize, j: usize) -> u16 {
        self.0[t * responses + j]
    }

    pub fn cells(&self) -> &[u16] {
        &self.0
    }

    /// Checks the pattern's length and every label against `spec`.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.0.len() != spec.cells() {
            return Err(Error::PatternShape {
                expected: spec.cells(),
                got: self.0.len(),
            });
        }
        let r = spec.responses();
        for (i, &label) in self.0.iter().enumerate() {
            let j = i % r;
            if label as usize >= spec.categories[j] {
                return Err(Error::CategoryOutOfRange {
                    response: j,
                    occasion: i / r,
                    label,
                    categories: spec.categories[j],
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Observed response configurations aggregated into frequencies `n_(y)`.
///
/// Patterns are kept in a sorted map, so iteration order (and everything
/// computed from it) depends only on the frequency table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    responses: usize,
    occasions: usize,
    counts: BTreeMap<Pattern, u64>,
    total: u64,
}

impl Dataset {
    pub fn new(responses: usize, occasions: usize) -> Self {
        Self {
            responses,
            occasions,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    /// Aggregates individual units.
    pub fn from_units<I>(responses: usize, occasions: usize, units: I) -> Result<Self>
    where
        I: IntoIterator<Item = Pattern>,
    {
        let mut ds = Self::new(responses, occasions);
        for unit in units {
            ds.add(unit, 1)?;
        }
        Ok(ds)
    }

    /// Adds `count` units with the given pattern. Zero counts are ignored.
    pub fn add(&mut self, pattern: Pattern, count: u64) -> Result<()> {
        let cells = self.responses * self.occasions;
        if pattern.0.len() != cells {
            return Err(Error::PatternShape {
                expected: cells,
                got: pattern.0.len(),
            });
        }
        if count == 0 {
            return Ok(());
        }
        *self.counts.entry(pattern).or_insert(0) += count;
        self.total += count;
        Ok(())
    }

    pub fn responses(&self) -> usize {
        self.responses
    }

    pub fn occasions(&self) -> usize {
        self.occasions
    }

    /// Total sample size `n`.
    pub fn n(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Distinct patterns with their frequencies, in sorted pattern order.
    pub fn iter(&self) -> impl Iterator<Item = (&Pattern, u64)> + '_ {
        self.counts.iter().map(|(p, &c)| (p, c))
    }

    pub fn frequency(&self, pattern: &Pattern) -> u64 {
        self.counts.get(pattern).copied().unwrap_or(0)
    }

    /// Every frequency multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let mut out = Self::new(self.responses, self.occasions);
        for (p, c) in self.iter() {
            out.add(p.clone(), c * factor).expect("same shape");
        }
        out
    }

    /// Expands back into one pattern per unit, in sorted pattern order.
    pub fn units(&self) -> impl Iterator<Item = &Pattern> + '_ {
        self.counts
            .iter()
            .flat_map(|(p, &c)| std::iter::repeat_n(p, c as usize))
    }

    /// Checks dimensions and labels against `spec`.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.responses != spec.responses() || self.occasions != spec.occasions {
            return Err(Error::InvalidSpec(format!(
                "dataset has r={} T={}, model has r={} T={}",
                self.responses,
                self.occasions,
                spec.responses(),
                spec.occasions
            )));
        }
        for p in self.counts.keys() {
            p.check(spec)?;
        }
        Ok(())
    }

    /// Smallest category counts (at least 2) covering every observed label.
    pub fn inferred_categories(&self) -> Vec<usize> {
        let mut cats = vec![2usize; self.responses];
        for p in self.counts.keys() {
            for (i, &label) in p.0.iter().enumerate() {
                let j = i % self.responses;
                cats[j] = cats[j].max(label as usize + 1);
            }
        }
        cats
    }
}
