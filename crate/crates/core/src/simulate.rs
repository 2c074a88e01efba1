//! Data generation from latent Markov parameterizations, and the five
//! simulation scenarios used by the study harness.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, LMParameters, Matrix, ModelSpec, Pattern};
use crate::rng::{substream, DEFAULT_SEED};

/// A generating model plus sample size and replicate count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub spec: ModelSpec,
    pub params: LMParameters,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(name: impl Into<String>, spec: ModelSpec, params: LMParameters, n: usize) -> Result<Self> {
        params.validate(&spec)?;
        Ok(Self {
            name: name.into(),
            spec,
            params,
            n,
            replicates: 100,
            seed: DEFAULT_SEED,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    /// Label keying the replicate substreams; distinct per (name, r, n).
    pub fn stream_label(&self) -> String {
        format!("{}/r{}/n{}", self.name, self.spec.responses(), self.n)
    }
}

fn categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return i;
        }
    }
    // rounding left x above the cumulative sum: take the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// One unit's responses together with its latent path.
pub fn draw_unit_with_path<R: Rng>(params: &LMParameters, spec: &ModelSpec, rng: &mut R) -> (Pattern, Vec<usize>) {
    let r = spec.responses();
    let mut path = Vec::with_capacity(spec.occasions);
    let mut cells = Vec::with_capacity(spec.cells());
    let mut state = categorical(rng, &params.initial);
    for t in 0..spec.occasions {
        if t > 0 {
            state = categorical(rng, params.transition(t).row(state));
        }
        path.push(state);
        for j in 0..r {
            cells.push(categorical(rng, params.emission(t, j).row(state)) as u16);
        }
    }
    (Pattern(cells), path)
}

/// One unit's response pattern.
pub fn draw_unit<R: Rng>(params: &LMParameters, spec: &ModelSpec, rng: &mut R) -> Pattern {
    draw_unit_with_path(params, spec, rng).0
}

/// `n` units, in draw order, on the substream of `(seed, stream label, replicate)`.
pub fn draw_units(scenario: &Scenario, replicate: u64) -> Vec<Pattern> {
    let mut rng = substream(scenario.seed, &scenario.stream_label(), replicate);
    (0..scenario.n)
        .map(|_| draw_unit(&scenario.params, &scenario.spec, &mut rng))
        .collect()
}

/// The aggregated units of [`draw_units`].
pub fn draw_dataset(scenario: &Scenario, replicate: u64) -> Dataset {
    Dataset::from_units(scenario.spec.responses(), scenario.spec.occasions, draw_units(scenario, replicate))
        .expect("drawn patterns fit the model dimensions")
}

/// Occasions in every preset.
pub const PRESET_OCCASIONS: usize = 5;

fn persistence_matrix(k: usize, stay: f64, off: f64) -> Matrix {
    let mut m = Matrix::filled(k, k, off);
    for i in 0..k {
        m.set(i, i, stay);
    }
    m
}

/// Parses `"1"`…`"5"` or `"scenario1"`…`"scenario5"`.
pub fn parse_scenario_id(name: &str) -> Result<u8> {
    let trimmed = name.trim();
    let digits = trimmed
        .strip_prefix("scenario")
        .unwrap_or(trimmed)
        .trim_start_matches(['-', '_', ' ']);
    match digits.parse::<u8>() {
        Ok(id @ 1..=5) => Ok(id),
        _ => Err(Error::UnknownScenario(name.to_string())),
    }
}

/// The five simulation scenarios: `T = 5`, `r` binary responses sharing one
/// emission matrix, equal initial probabilities.
///
/// | id | k | persistence | P(y = 0 \| u)   | n        |
/// |----|---|-------------|-----------------|----------|
/// | 1  | 2 | 0.9         | 0.8, 0.2        | 250, 500 |
/// | 2  | 2 | 0.7         | 0.8, 0.2        | 250, 500 |
/// | 3  | 2 | 0.9         | 0.7, 0.3        | 250, 500 |
/// | 4  | 3 | 0.90        | 0.9, 0.1, 0.7   | 500      |
/// | 5  | 3 | 0.70        | 0.9, 0.1, 0.7   | 500      |
pub fn scenario_preset(name: &str, responses: usize, n: usize) -> Result<Scenario> {
    let id = parse_scenario_id(name)?;
    if responses == 0 {
        return Err(Error::InvalidScenario("r must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidScenario("n must be at least 1".into()));
    }
    // (k, diagonal, off-diagonal, emission rows [P(y=0|u), P(y=1|u)])
    let (k, stay, off, rows): (usize, f64, f64, Vec<[f64; 2]>) = match id {
        1 => (2, 0.9, 0.1, vec![[0.8, 0.2], [0.2, 0.8]]),
        2 => (2, 0.7, 0.3, vec![[0.8, 0.2], [0.2, 0.8]]),
        3 => (2, 0.9, 0.1, vec![[0.7, 0.3], [0.3, 0.7]]),
        4 => (3, 0.90, 0.05, vec![[0.9, 0.1], [0.1, 0.9], [0.7, 0.3]]),
        _ => (3, 0.70, 0.15, vec![[0.9, 0.1], [0.1, 0.9], [0.7, 0.3]]),
    };
    if k == 3 && n != 500 {
        return Err(Error::InvalidScenario(format!(
            "scenario {id} is defined for n = 500 only (got {n})"
        )));
    }
    let spec = ModelSpec::binary(k, PRESET_OCCASIONS, responses)?;
    let emission = Matrix::from_rows(rows.iter().map(|r| r.to_vec()).collect())?;
    let params = LMParameters {
        initial: vec![1.0 / k as f64; k],
        transitions: vec![persistence_matrix(k, stay, off)],
        emissions: vec![vec![emission; responses]],
    };
    Scenario::new(format!("scenario{id}"), spec, params, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn presets_match_the_published_design() {
        let s1 = scenario_preset("1", 1, 250).unwrap();
        assert_eq!(s1.params.transitions[0].to_rows(), vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
        assert_eq!(s1.params.emissions[0][0].to_rows(), vec![vec![0.8, 0.2], vec![0.2, 0.8]]);
        assert_eq!(s1.params.initial, vec![0.5, 0.5]);

        let s2 = scenario_preset("scenario2", 3, 500).unwrap();
        assert_eq!(s2.params.transitions[0].to_rows(), vec![vec![0.7, 0.3], vec![0.3, 0.7]]);
        assert_eq!(s2.params.emissions[0].len(), 3);

        let s3 = scenario_preset("3", 3, 250).unwrap();
        assert_eq!(s3.params.emissions[0][2].to_rows(), vec![vec![0.7, 0.3], vec![0.3, 0.7]]);

        let s4 = scenario_preset("4", 3, 500).unwrap();
        assert_eq!(s4.params.transitions[0].row(1), &[0.05, 0.90, 0.05]);
        assert_eq!(
            s4.params.emissions[0][0].to_rows(),
            vec![vec![0.9, 0.1], vec![0.1, 0.9], vec![0.7, 0.3]]
        );

        let s5 = scenario_preset("5", 5, 500).unwrap();
        let t = &s5.params.transitions[0];
        assert_eq!(t.get(0, 0), 0.70);
        assert_eq!((t.get(0, 1), t.get(2, 1)), (0.15, 0.15));
        for id in 1..=5 {
            let n = if id >= 4 { 500 } else { 250 };
            for r in [1, 3, 5] {
                let s = scenario_preset(&id.to_string(), r, n).unwrap();
                assert!(s.params.validate(&s.spec).is_ok());
                assert_eq!(s.spec.occasions, 5);
            }
        }
    }

    #[test]
    fn preset_errors() {
        assert!(matches!(scenario_preset("6", 1, 250), Err(Error::UnknownScenario(_))));
        assert!(matches!(scenario_preset("x", 1, 250), Err(Error::UnknownScenario(_))));
        assert!(matches!(scenario_preset("4", 1, 250), Err(Error::InvalidScenario(_))));
        assert!(scenario_preset("1", 1, 0).is_err());
    }

    #[test]
    fn degenerate_parameters_give_zeros() {
        let spec = ModelSpec::binary(2, 4, 2).unwrap();
        let mut p = LMParameters::uniform(&spec);
        p.initial = vec![1.0, 0.0];
        p.transitions[0] = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        p.emissions[0] = vec![Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap(); 2];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (y, path) = draw_unit_with_path(&p, &spec, &mut rng);
            assert_eq!(y, Pattern(vec![0; 8]));
            assert_eq!(path, vec![0; 4]);
        }
    }

    #[test]
    fn datasets_are_reproducible_per_replicate() {
        let s = scenario_preset("1", 3, 250).unwrap().with_seed(99);
        let in_sequence: Vec<Dataset> = (0..5).map(|i| draw_dataset(&s, i)).collect();
        assert_eq!(draw_dataset(&s, 3), in_sequence[3]);
        assert_ne!(in_sequence[2], in_sequence[3]);
        for d in &in_sequence {
            assert_eq!(d.n(), 250);
        }
        let tiny = Scenario { n: 1, ..s };
        let d = draw_dataset(&tiny, 0);
        assert_eq!((d.n(), d.distinct()), (1, 1));
    }
}
