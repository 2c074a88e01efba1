//! Brute-force reference computations over every latent path, written
//! directly from the model definition and sharing no code with the
//! recursions under test.

#![allow(dead_code)]

use lmselect::model::{LMParameters, Matrix, ModelSpec, Pattern};
use lmselect::rng::substream;
use rand::Rng;

/// Every path in `{0..k}^T`, first occasion most significant.
pub fn all_paths(k: usize, occasions: usize) -> Vec<Vec<usize>> {
    let total = k.pow(occasions as u32);
    (0..total)
        .map(|mut code| {
            let mut path = vec![0; occasions];
            for t in (0..occasions).rev() {
                path[t] = code % k;
                code /= k;
            }
            path
        })
        .collect()
}

fn transition_of(params: &LMParameters, t: usize) -> &Matrix {
    if params.transitions.len() == 1 {
        &params.transitions[0]
    } else {
        &params.transitions[t - 1]
    }
}

fn emission_of(params: &LMParameters, t: usize, j: usize) -> &Matrix {
    if params.emissions.len() == 1 {
        &params.emissions[0][j]
    } else {
        &params.emissions[t][j]
    }
}

/// `p(U = path, Y = y)`.
pub fn path_joint(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern, path: &[usize]) -> f64 {
    let r = spec.categories.len();
    let mut p = params.initial[path[0]];
    for (t, &u) in path.iter().enumerate() {
        if t > 0 {
            p *= transition_of(params, t).get(path[t - 1], u);
        }
        for j in 0..r {
            p *= emission_of(params, t, j).get(u, pattern.0[t * r + j] as usize);
        }
    }
    p
}

/// Manifest probability, joint path weights and posterior path weights.
pub struct Enumerated {
    pub paths: Vec<Vec<usize>>,
    pub joint: Vec<f64>,
    pub prob: f64,
}

impl Enumerated {
    pub fn new(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern) -> Self {
        let paths = all_paths(spec.states, spec.occasions);
        let joint: Vec<f64> = paths.iter().map(|p| path_joint(params, spec, pattern, p)).collect();
        let prob = joint.iter().sum();
        Self { paths, joint, prob }
    }

    pub fn marginal(&self, t: usize, u: usize) -> f64 {
        self.paths
            .iter()
            .zip(&self.joint)
            .filter(|(p, _)| p[t] == u)
            .map(|(_, w)| w)
            .sum::<f64>()
            / self.prob
    }

    pub fn pairwise(&self, t: usize, v: usize, u: usize) -> f64 {
        self.paths
            .iter()
            .zip(&self.joint)
            .filter(|(p, _)| p[t - 1] == v && p[t] == u)
            .map(|(_, w)| w)
            .sum::<f64>()
            / self.prob
    }

    /// Shannon entropy of the posterior path distribution.
    pub fn entropy(&self) -> f64 {
        self.joint
            .iter()
            .map(|&w| {
                let f = w / self.prob;
                if f > 0.0 {
                    -f * f.ln()
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Every response pattern of a spec.
pub fn all_patterns(spec: &ModelSpec) -> Vec<Pattern> {
    let cells: Vec<usize> = (0..spec.occasions).flat_map(|_| spec.categories.iter().copied()).collect();
    let total: usize = cells.iter().product();
    (0..total)
        .map(|mut code| {
            let mut labels = vec![0u16; cells.len()];
            for i in (0..cells.len()).rev() {
                labels[i] = (code % cells[i]) as u16;
                code /= cells[i];
            }
            Pattern(labels)
        })
        .collect()
}

fn random_row<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    // squared uniforms put mass near the simplex faces
    let raw: Vec<f64> = (0..n).map(|_| 0.02 + rng.random::<f64>().powi(2)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_rows((0..rows).map(|_| random_row(rng, cols)).collect()).unwrap()
}

/// Random parameters for `spec`, reproducible from `seed`.
pub fn random_parameters(spec: &ModelSpec, seed: u64) -> LMParameters {
    let mut rng = substream(seed, "oracle-params", 0);
    let k = spec.states;
    LMParameters {
        initial: random_row(&mut rng, k),
        transitions: (0..spec.transition_blocks()).map(|_| random_matrix(&mut rng, k, k)).collect(),
        emissions: (0..spec.emission_blocks())
            .map(|_| spec.categories.iter().map(|&c| random_matrix(&mut rng, k, c)).collect())
            .collect(),
    }
}

/// A random pattern for `spec`.
pub fn random_pattern(spec: &ModelSpec, seed: u64) -> Pattern {
    let mut rng = substream(seed, "oracle-pattern", 0);
    Pattern(
        (0..spec.occasions)
            .flat_map(|_| spec.categories.clone())
            .map(|c| rng.random_range(0..c) as u16)
            .collect(),
    )
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Scenario-1 generating parameters for `r` binary responses.
pub fn scenario1(r: usize, occasions: usize) -> (ModelSpec, LMParameters) {
    let spec = ModelSpec::binary(2, occasions, r).unwrap();
    let phi = Matrix::from_rows(vec![vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap();
    let params = LMParameters {
        initial: vec![0.5, 0.5],
        transitions: vec![Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap()],
        emissions: vec![vec![phi; r]],
    };
    (spec, params)
}
