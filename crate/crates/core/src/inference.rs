//! Manifest probabilities, posteriors and posterior entropies.
//!
//! Forward and backward vectors are renormalized at every occasion. With
//! scaling constants `c_t`, the stored forward vector at `t` is
//! `q_t / (c_1 ⋯ c_t)` and the stored backward vector is
//! `q̄_t / (c_{t+1} ⋯ c_T)`, so `p(Y = y) = Π_t c_t` and each product
//! `forward_t ⊙ backward_t` is already the posterior at `t`.

use crate::error::{Error, Result};
use crate::model::{Dataset, LMParameters, Matrix, ModelSpec, Pattern};

/// Largest `k^T` for which the exact entropy may be computed by enumeration.
pub const ENUMERATION_CAP: u64 = 100_000;

/// `−x log x` with the `0 log 0 = 0` convention. Values at or above 1
/// (rounding noise on a certain event) contribute 0.
#[inline]
pub fn neg_x_log_x(x: f64) -> f64 {
    if x > 0.0 && x < 1.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of a (sub-)distribution.
pub fn shannon(p: &[f64]) -> f64 {
    p.iter().copied().map(neg_x_log_x).sum()
}

/// Emission likelihoods `φ_{y|u}^{(t)} = Π_j φ_{j y_j|u}^{(t)}`, laid out `t * k + u`.
pub(crate) fn emission_likelihoods(
    params: &LMParameters,
    spec: &ModelSpec,
    pattern: &Pattern,
    out: &mut Vec<f64>,
) {
    let k = spec.states;
    let r = spec.responses();
    out.clear();
    out.resize(spec.occasions * k, 1.0);
    for t in 0..spec.occasions {
        let row = &mut out[t * k..(t + 1) * k];
        for j in 0..r {
            let m = params.emission(t, j);
            let y = pattern.label(r, t, j) as usize;
            for (u, e) in row.iter_mut().enumerate() {
                *e *= m.get(u, y);
            }
        }
    }
}

/// Scaled forward–backward quantities for one pattern.
#[derive(Debug, Clone)]
pub struct ForwardBackwardTables {
    states: usize,
    occasions: usize,
    emission: Vec<f64>,
    forward: Vec<f64>,
    backward: Vec<f64>,
    scales: Vec<f64>,
    log_scales: Vec<f64>,
    /// `Σ_u forward_T(u)`: 1 when rescaled, `p(Y = y)` otherwise.
    terminal_mass: f64,
    log_prob: f64,
}

impl ForwardBackwardTables {
    /// Per-occasion rescaled recursions; the form used everywhere else.
    pub fn compute(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern) -> Result<Self> {
        Self::compute_with(params, spec, pattern, true)
    }

    /// `rescale = false` runs the textbook recursions with unit scaling
    /// constants; it underflows for long sequences and exists for comparison.
    pub fn compute_with(
        params: &LMParameters,
        spec: &ModelSpec,
        pattern: &Pattern,
        rescale: bool,
    ) -> Result<Self> {
        pattern.check(spec)?;
        let mut tables = Self::empty();
        tables.fill(params, spec, pattern, rescale)?;
        Ok(tables)
    }

    pub(crate) fn empty() -> Self {
        Self {
            states: 0,
            occasions: 0,
            emission: Vec::new(),
            forward: Vec::new(),
            backward: Vec::new(),
            scales: Vec::new(),
            log_scales: Vec::new(),
            terminal_mass: 0.0,
            log_prob: f64::NEG_INFINITY,
        }
    }

    /// Recomputes in place, reusing buffers. The pattern must already have
    /// been checked against `spec`.
    pub(crate) fn fill(
        &mut self,
        params: &LMParameters,
        spec: &ModelSpec,
        pattern: &Pattern,
        rescale: bool,
    ) -> Result<()> {
        let k = spec.states;
        let n_t = spec.occasions;
        self.states = k;
        self.occasions = n_t;
        emission_likelihoods(params, spec, pattern, &mut self.emission);
        let emission = &self.emission;
        let forward = &mut self.forward;
        let backward = &mut self.backward;
        let scales = &mut self.scales;
        forward.clear();
        forward.resize(n_t * k, 0.0);
        backward.clear();
        backward.resize(n_t * k, 0.0);
        scales.clear();
        scales.resize(n_t, 1.0);

        let zero = || Error::ZeroProbability(pattern.clone());

        for u in 0..k {
            forward[u] = params.initial[u] * emission[u];
        }
        if rescale {
            scales[0] = normalize(&mut forward[..k]).ok_or_else(zero)?;
        }
        for t in 1..n_t {
            let trans = params.transition(t);
            let (prev, cur) = forward.split_at_mut(t * k);
            let prev = &prev[(t - 1) * k..];
            let cur = &mut cur[..k];
            propagate_forward(prev, trans, &emission[t * k..(t + 1) * k], cur);
            if rescale {
                scales[t] = normalize(cur).ok_or_else(zero)?;
            }
        }
        let terminal_mass: f64 = forward[(n_t - 1) * k..].iter().sum();
        if !(terminal_mass > 0.0) {
            return Err(zero());
        }

        backward[(n_t - 1) * k..].fill(1.0);
        for t in (0..n_t.saturating_sub(1)).rev() {
            let trans = params.transition(t + 1);
            let (cur, next) = backward.split_at_mut((t + 1) * k);
            propagate_backward(
                &next[..k],
                trans,
                &emission[(t + 1) * k..(t + 2) * k],
                scales[t + 1],
                &mut cur[t * k..],
            );
        }

        self.log_scales.clear();
        self.log_scales.extend(scales.iter().map(|c| c.ln()));
        self.log_prob = self.log_scales.iter().sum::<f64>() + terminal_mass.ln();
        self.terminal_mass = terminal_mass;
        Ok(())
    }

    /// Marginal posterior at `t` (scaled product, divided by the terminal mass).
    #[inline]
    pub(crate) fn marginal_into(&self, t: usize, out: &mut [f64]) {
        let z = self.terminal_mass;
        for (u, o) in out.iter_mut().enumerate() {
            *o = self.forward(t)[u] * self.backward(t)[u] / z;
        }
    }

    /// `p(U_{t−1} = v, U_t = u | y)` for `t ≥ 1`.
    #[inline]
    pub(crate) fn joint(&self, trans: &Matrix, t: usize, v: usize, u: usize) -> f64 {
        let k = self.states;
        self.forward(t - 1)[v] * trans.get(v, u) * self.emission[t * k + u] * self.backward(t)[u]
            / (self.scales[t] * self.terminal_mass)
    }

    /// `log p(Y = y)`.
    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    pub fn log_scales(&self) -> &[f64] {
        &self.log_scales
    }

    pub fn forward(&self, t: usize) -> &[f64] {
        &self.forward[t * self.states..(t + 1) * self.states]
    }

    pub fn backward(&self, t: usize) -> &[f64] {
        &self.backward[t * self.states..(t + 1) * self.states]
    }

    /// `log Σ_u q_t(u) q̄_t(u)` rebuilt from the scaled vectors at occasion
    /// `t`; equals [`log_prob`](Self::log_prob) for every `t`.
    pub fn reconstituted_log_prob(&self, t: usize) -> f64 {
        let s: f64 = self
            .forward(t)
            .iter()
            .zip(self.backward(t))
            .map(|(a, b)| a * b)
            .sum();
        s.ln() + self.log_scales.iter().sum::<f64>()
    }

    /// Marginal and pairwise posteriors.
    pub fn posteriors(&self, params: &LMParameters) -> PosteriorTables {
        let k = self.states;
        let n_t = self.occasions;
        let mut marginals = vec![0.0; n_t * k];
        for t in 0..n_t {
            self.marginal_into(t, &mut marginals[t * k..(t + 1) * k]);
        }
        let mut conditionals = Vec::with_capacity(n_t.saturating_sub(1));
        for t in 1..n_t {
            let trans = params.transition(t);
            let mut cond = Matrix::zeros(k, k);
            for v in 0..k {
                let from = marginals[(t - 1) * k + v];
                if from <= 0.0 {
                    continue;
                }
                for u in 0..k {
                    cond.set(v, u, self.joint(trans, t, v, u) / from);
                }
            }
            conditionals.push(cond);
        }
        PosteriorTables {
            states: k,
            occasions: n_t,
            marginals,
            conditionals,
        }
    }
}

fn normalize(v: &mut [f64]) -> Option<f64> {
    let s: f64 = v.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= s);
    Some(s)
}

#[inline]
fn propagate_forward(prev: &[f64], trans: &Matrix, emis: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (v, &a) in prev.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(trans.row(v)) {
            *o += a * p;
        }
    }
    for (o, &e) in out.iter_mut().zip(emis) {
        *o *= e;
    }
}

#[inline]
fn propagate_backward(next: &[f64], trans: &Matrix, emis: &[f64], scale: f64, out: &mut [f64]) {
    for (v, o) in out.iter_mut().take(next.len()).enumerate() {
        let row = trans.row(v);
        let mut s = 0.0;
        for u in 0..next.len() {
            s += row[u] * emis[u] * next[u];
        }
        *o = s / scale;
    }
}

/// Marginal posteriors `f_{u|y}^{(t)}` and conditional pairwise posteriors
/// `f_{u|v,y}^{(t|t−1)}` for one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTables {
    states: usize,
    occasions: usize,
    marginals: Vec<f64>,
    /// `conditionals[t - 1]` has rows `v` (state at `t − 1`) and columns `u`.
    /// Rows with zero marginal at `t − 1` are left at zero.
    conditionals: Vec<Matrix>,
}

impl PosteriorTables {
    pub fn states(&self) -> usize {
        self.states
    }

    pub fn occasions(&self) -> usize {
        self.occasions
    }

    /// Posterior distribution of the state at occasion `t`.
    pub fn marginal(&self, t: usize) -> &[f64] {
        &self.marginals[t * self.states..(t + 1) * self.states]
    }

    /// `p(U_t = u | U_{t−1} = v, y)` for `t ≥ 1`.
    pub fn conditional(&self, t: usize) -> &Matrix {
        &self.conditionals[t - 1]
    }

    /// `p(U_{t−1} = v, U_t = u | y)` for `t ≥ 1`.
    pub fn joint(&self, t: usize, v: usize, u: usize) -> f64 {
        self.marginal(t - 1)[v] * self.conditionals[t - 1].get(v, u)
    }

    /// EN₁ contribution: sum over occasions of the marginal entropies.
    pub fn marginal_entropy(&self) -> f64 {
        (0..self.occasions).map(|t| shannon(self.marginal(t))).sum()
    }

    /// Exact entropy of the latent path via the chain rule of the posterior
    /// Markov chain: `H(U_1|y) + Σ_t Σ_v f_{v|y}^{(t−1)} H(U_t | U_{t−1} = v, y)`.
    pub fn chain_entropy(&self) -> f64 {
        let mut h = shannon(self.marginal(0));
        for t in 1..self.occasions {
            let prev = self.marginal(t - 1);
            let cond = self.conditional(t);
            for (v, &w) in prev.iter().enumerate() {
                if w > 0.0 {
                    h += w * shannon(cond.row(v));
                }
            }
        }
        h
    }
}

/// `log p(Y = y)` by the rescaled forward recursion.
pub fn log_manifest_probability(
    params: &LMParameters,
    spec: &ModelSpec,
    pattern: &Pattern,
) -> Result<f64> {
    Ok(ForwardBackwardTables::compute(params, spec, pattern)?.log_prob())
}

/// `ℓ(θ) = Σ_y n_(y) log p(Y = y)`.
pub fn log_likelihood(params: &LMParameters, spec: &ModelSpec, dataset: &Dataset) -> Result<f64> {
    dataset.check(spec)?;
    dataset.iter().try_fold(0.0, |acc, (p, n)| {
        Ok(acc + n as f64 * log_manifest_probability(params, spec, p)?)
    })
}

pub fn posteriors(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern) -> Result<PosteriorTables> {
    Ok(ForwardBackwardTables::compute(params, spec, pattern)?.posteriors(params))
}

/// Which posterior entropy to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EntropyKind {
    /// EN: entropy of the posterior over complete latent paths.
    Exact,
    /// EN₁: sum of per-occasion marginal entropies.
    Marginal,
    /// EN₂: EN₁ divided by `T`.
    Normalized,
}

/// How [`entropy_exact_with`] evaluates EN.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactEvaluator {
    /// Explicit sum over all `k^T` paths; refused above [`ENUMERATION_CAP`].
    Enumeration,
    /// Chain-rule decomposition over the posterior Markov chain.
    ChainDecomposition,
}

/// All three per-unit entropies of one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Entropies {
    pub exact: f64,
    pub marginal: f64,
    pub normalized: f64,
}

impl Entropies {
    pub fn get(&self, kind: EntropyKind) -> f64 {
        match kind {
            EntropyKind::Exact => self.exact,
            EntropyKind::Marginal => self.marginal,
            EntropyKind::Normalized => self.normalized,
        }
    }
}

/// EN contribution of one unit, by chain decomposition.
pub fn entropy_exact(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern) -> Result<f64> {
    entropy_exact_with(params, spec, pattern, ExactEvaluator::ChainDecomposition)
}

pub fn entropy_exact_with(
    params: &LMParameters,
    spec: &ModelSpec,
    pattern: &Pattern,
    evaluator: ExactEvaluator,
) -> Result<f64> {
    match evaluator {
        ExactEvaluator::ChainDecomposition => Ok(posteriors(params, spec, pattern)?.chain_entropy()),
        ExactEvaluator::Enumeration => enumerated_entropy(params, spec, pattern),
    }
}

/// Enumerates every latent path; independent of the forward–backward tables.
fn enumerated_entropy(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern) -> Result<f64> {
    let configurations = spec.latent_configurations();
    if configurations > ENUMERATION_CAP as u128 {
        return Err(Error::EnumerationCap {
            configurations,
            cap: ENUMERATION_CAP,
        });
    }
    pattern.check(spec)?;
    let k = spec.states;
    let n_t = spec.occasions;
    let mut emission = Vec::new();
    emission_likelihoods(params, spec, pattern, &mut emission);

    let mut path = vec![0usize; n_t];
    let mut log_joint = Vec::with_capacity(configurations as usize);
    loop {
        let mut lp = (params.initial[path[0]] * emission[path[0]]).ln();
        for t in 1..n_t {
            lp += (params.transition(t).get(path[t - 1], path[t]) * emission[t * k + path[t]]).ln();
        }
        log_joint.push(lp);
        if !advance(&mut path, k) {
            break;
        }
    }
    let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::ZeroProbability(pattern.clone()));
    }
    let log_p = max + log_joint.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok(log_joint
        .iter()
        .map(|l| {
            let f = (l - log_p).exp();
            if f > 0.0 {
                -f * (l - log_p)
            } else {
                0.0
            }
        })
        .sum())
}

/// Odometer increment over `{0..k}^T`; false once it wraps around.
fn advance(path: &mut [usize], k: usize) -> bool {
    for s in path.iter_mut().rev() {
        *s += 1;
        if *s < k {
            return true;
        }
        *s = 0;
    }
    false
}

/// EN₁ contribution of one unit.
pub fn entropy_marginal(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern) -> Result<f64> {
    Ok(posteriors(params, spec, pattern)?.marginal_entropy())
}

/// EN₂ contribution of one unit: EN₁ / T.
pub fn entropy_normalized(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern) -> Result<f64> {
    Ok(entropy_marginal(params, spec, pattern)? / spec.occasions as f64)
}

/// EN, EN₁ and EN₂ of one unit from a single forward–backward pass.
pub fn pattern_entropies(params: &LMParameters, spec: &ModelSpec, pattern: &Pattern) -> Result<Entropies> {
    let post = posteriors(params, spec, pattern)?;
    let marginal = post.marginal_entropy();
    Ok(Entropies {
        exact: post.chain_entropy(),
        marginal,
        normalized: marginal / spec.occasions as f64,
    })
}

/// Frequency-weighted sum over the sample of all three entropies.
/// Exactly zero when `k = 1`.
pub fn dataset_entropies(params: &LMParameters, spec: &ModelSpec, dataset: &Dataset) -> Result<Entropies> {
    dataset.check(spec)?;
    if spec.states == 1 {
        return Ok(Entropies::default());
    }
    let mut total = Entropies::default();
    for (p, n) in dataset.iter() {
        let e = pattern_entropies(params, spec, p)?;
        let w = n as f64;
        total.exact += w * e.exact;
        total.marginal += w * e.marginal;
        total.normalized += w * e.normalized;
    }
    Ok(total)
}

pub fn dataset_entropy(
    params: &LMParameters,
    spec: &ModelSpec,
    dataset: &Dataset,
    kind: EntropyKind,
) -> Result<f64> {
    Ok(dataset_entropies(params, spec, dataset)?.get(kind))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(t: usize, pi: [f64; 2], phi0: [f64; 2], stay: f64) -> (ModelSpec, LMParameters) {
        let spec = ModelSpec::binary(2, t, 1).unwrap();
        let mut p = LMParameters::uniform(&spec);
        p.initial = pi.to_vec();
        if t > 1 {
            p.transitions[0] =
                Matrix::from_rows(vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]]).unwrap();
        }
        p.emissions[0][0] = Matrix::from_rows(vec![
            vec![phi0[0], 1.0 - phi0[0]],
            vec![phi0[1], 1.0 - phi0[1]],
        ])
        .unwrap();
        (spec, p)
    }

    #[test]
    fn single_occasion_mixture() {
        let (spec, p) = two_state(1, [0.5, 0.5], [0.8, 0.2], 0.9);
        let lp = log_manifest_probability(&p, &spec, &Pattern(vec![0])).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-15);
        let post = posteriors(&p, &spec, &Pattern(vec![0])).unwrap();
        assert!((post.marginal(0)[0] - 0.8).abs() < 1e-15);
        assert!((post.marginal(0)[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn single_state_is_product_of_emissions() {
        let spec = ModelSpec::new(1, 3, vec![2, 3]).unwrap();
        let mut p = LMParameters::uniform(&spec);
        p.emissions[0][0] = Matrix::from_rows(vec![vec![0.3, 0.7]]).unwrap();
        p.emissions[0][1] = Matrix::from_rows(vec![vec![0.2, 0.5, 0.3]]).unwrap();
        let y = Pattern(vec![0, 2, 1, 1, 1, 0]);
        let expected = 0.3f64.ln() + 0.3f64.ln() + 0.7f64.ln() + 0.5f64.ln() + 0.7f64.ln() + 0.2f64.ln();
        let lp = log_manifest_probability(&p, &spec, &y).unwrap();
        assert!((lp - expected).abs() < 1e-12);
        let post = posteriors(&p, &spec, &y).unwrap();
        for t in 0..3 {
            assert_eq!(post.marginal(t), &[1.0]);
        }
        assert_eq!(post.chain_entropy(), 0.0);
        assert_eq!(post.marginal_entropy(), 0.0);
    }

    #[test]
    fn zero_probability_is_signalled() {
        let (spec, p) = two_state(2, [1.0, 0.0], [1.0, 0.5], 1.0);
        let err = log_manifest_probability(&p, &spec, &Pattern(vec![0, 1])).unwrap_err();
        assert!(matches!(err, Error::ZeroProbability(_)));
        let ds = Dataset::from_units(1, 2, vec![Pattern(vec![0, 0]), Pattern(vec![1, 0])]).unwrap();
        match log_likelihood(&p, &spec, &ds).unwrap_err() {
            Error::ZeroProbability(pat) => assert_eq!(pat, Pattern(vec![1, 0])),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn log_likelihood_is_linear_in_frequencies() {
        let (spec, p) = two_state(3, [0.4, 0.6], [0.8, 0.3], 0.85);
        let mut ds = Dataset::new(1, 3);
        ds.add(Pattern(vec![0, 1, 1]), 10).unwrap();
        let single = log_manifest_probability(&p, &spec, &Pattern(vec![0, 1, 1])).unwrap();
        let ll = log_likelihood(&p, &spec, &ds).unwrap();
        assert!((ll - 10.0 * single).abs() < 1e-12);
        ds.add(Pattern(vec![1, 1, 0]), 3).unwrap();
        let ll = log_likelihood(&p, &spec, &ds).unwrap();
        let doubled = log_likelihood(&p, &spec, &ds.scaled(2)).unwrap();
        assert_eq!(doubled, 2.0 * ll);
    }

    #[test]
    fn scaling_does_not_change_results() {
        let (spec, p) = two_state(5, [0.3, 0.7], [0.8, 0.2], 0.9);
        let y = Pattern(vec![0, 0, 1, 1, 0]);
        let a = ForwardBackwardTables::compute_with(&p, &spec, &y, true).unwrap();
        let b = ForwardBackwardTables::compute_with(&p, &spec, &y, false).unwrap();
        assert!((a.log_prob() - b.log_prob()).abs() < 1e-12);
        let (pa, pb) = (a.posteriors(&p), b.posteriors(&p));
        for t in 0..5 {
            for u in 0..2 {
                assert!((pa.marginal(t)[u] - pb.marginal(t)[u]).abs() < 1e-10);
                if t > 0 {
                    for v in 0..2 {
                        assert!((pa.joint(t, v, u) - pb.joint(t, v, u)).abs() < 1e-10);
                    }
                }
            }
        }
        for t in 0..5 {
            assert!((a.reconstituted_log_prob(t) - a.log_prob()).abs() < 1e-12);
            assert!((b.reconstituted_log_prob(t) - b.log_prob()).abs() < 1e-12);
        }
    }

    #[test]
    fn rescaling_survives_long_sequences() {
        let spec = ModelSpec::binary(2, 400, 5).unwrap();
        let mut p = LMParameters::uniform(&spec);
        p.emissions[0] = vec![Matrix::from_rows(vec![vec![0.1, 0.9], vec![0.7, 0.3]]).unwrap(); 5];
        let y = Pattern(vec![0; 2000]);
        let lp = log_manifest_probability(&p, &spec, &y).unwrap();
        assert!(lp.is_finite() && lp < -700.0);
        let unscaled = ForwardBackwardTables::compute_with(&p, &spec, &y, false);
        assert!(unscaled.is_err());
    }

    #[test]
    fn entropy_of_uniform_single_occasion() {
        let (spec, p) = two_state(1, [0.5, 0.5], [0.5, 0.5], 0.9);
        let y = Pattern(vec![1]);
        let en = entropy_exact(&p, &spec, &y).unwrap();
        assert!((en - 2f64.ln()).abs() < 1e-15);
        let en_enum = entropy_exact_with(&p, &spec, &y, ExactEvaluator::Enumeration).unwrap();
        assert!((en_enum - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_posterior_has_zero_entropy() {
        let (spec, p) = two_state(3, [1.0, 0.0], [0.9, 0.1], 1.0);
        let y = Pattern(vec![0, 1, 0]);
        assert_eq!(entropy_exact(&p, &spec, &y).unwrap(), 0.0);
        assert_eq!(entropy_marginal(&p, &spec, &y).unwrap(), 0.0);
        assert_eq!(entropy_normalized(&p, &spec, &y).unwrap(), 0.0);
        assert_eq!(
            entropy_exact_with(&p, &spec, &y, ExactEvaluator::Enumeration).unwrap(),
            0.0
        );
    }

    #[test]
    fn uniform_marginals_over_three_occasions() {
        let (spec, p) = two_state(3, [0.5, 0.5], [0.5, 0.5], 0.5);
        let y = Pattern(vec![0, 1, 1]);
        let en1 = entropy_marginal(&p, &spec, &y).unwrap();
        assert!((en1 - 3.0 * 2f64.ln()).abs() < 1e-14);
        let en2 = entropy_normalized(&p, &spec, &y).unwrap();
        assert!((en2 - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn evaluators_agree_on_truncated_scenario() {
        let (spec, p) = two_state(3, [0.5, 0.5], [0.8, 0.2], 0.9);
        let y = Pattern(vec![0, 1, 0]);
        let a = entropy_exact_with(&p, &spec, &y, ExactEvaluator::Enumeration).unwrap();
        let b = entropy_exact_with(&p, &spec, &y, ExactEvaluator::ChainDecomposition).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        let en1 = entropy_marginal(&p, &spec, &y).unwrap();
        assert!(b <= en1 + 1e-12);
    }

    #[test]
    fn enumeration_respects_cap() {
        let spec = ModelSpec::binary(4, 9, 1).unwrap();
        let p = LMParameters::uniform(&spec);
        let y = Pattern(vec![0; 9]);
        let err = entropy_exact_with(&p, &spec, &y, ExactEvaluator::Enumeration).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { configurations: 262_144, .. }));
        assert!(entropy_exact(&p, &spec, &y).is_ok());
    }

    #[test]
    fn dataset_entropy_aggregation() {
        let (spec, p) = two_state(4, [0.5, 0.5], [0.8, 0.2], 0.9);
        let y = Pattern(vec![0, 1, 1, 0]);
        let single = Dataset::from_units(1, 4, vec![y.clone()]).unwrap();
        let per_unit = entropy_exact(&p, &spec, &y).unwrap();
        let s = dataset_entropy(&p, &spec, &single, EntropyKind::Exact).unwrap();
        assert_eq!(s, per_unit);
        let double = Dataset::from_units(1, 4, vec![y.clone(), y]).unwrap();
        let d = dataset_entropy(&p, &spec, &double, EntropyKind::Exact).unwrap();
        assert_eq!(d, 2.0 * per_unit);

        let one = ModelSpec::binary(1, 4, 1).unwrap();
        let q = LMParameters::uniform(&one);
        for kind in [EntropyKind::Exact, EntropyKind::Marginal, EntropyKind::Normalized] {
            assert_eq!(dataset_entropy(&q, &one, &double, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn posterior_identities_hold() {
        let spec = ModelSpec::new(3, 4, vec![2, 3]).unwrap();
        let mut p = LMParameters::uniform(&spec);
        p.initial = vec![0.2, 0.5, 0.3];
        p.transitions[0] = Matrix::from_rows(vec![
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.6, 0.3],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        p.emissions[0][0] =
            Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.2, 0.8]]).unwrap();
        p.emissions[0][1] = Matrix::from_rows(vec![
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.2, 0.6],
            vec![0.3, 0.4, 0.3],
        ])
        .unwrap();
        let y = Pattern(vec![0, 2, 1, 1, 1, 0, 0, 0]);
        let post = posteriors(&p, &spec, &y).unwrap();
        for t in 0..4 {
            assert!((post.marginal(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for t in 1..4 {
            for v in 0..3 {
                assert!((post.conditional(t).row(v).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for u in 0..3 {
                let s: f64 = (0..3).map(|v| post.joint(t, v, u)).sum();
                assert!((s - post.marginal(t)[u]).abs() < 1e-12);
            }
        }
    }
}
