//! Likelihood-based and classification-based criteria for choosing `k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::em::FitResult;
use crate::error::{Error, Result};
use crate::inference::{dataset_entropies, Entropies};
use crate::model::Dataset;

/// The nine selection indices, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "BIC")]
    Bic,
    #[serde(rename = "AIC")]
    Aic,
    #[serde(rename = "AIC3")]
    Aic3,
    #[serde(rename = "CAIC")]
    Caic,
    #[serde(rename = "NEC")]
    Nec,
    #[serde(rename = "NEC1")]
    Nec1,
    #[serde(rename = "NEC2")]
    Nec2,
    #[serde(rename = "CLC")]
    Clc,
    #[serde(rename = "ICL-BIC")]
    IclBic,
}

impl Criterion {
    pub const ALL: [Criterion; 9] = [
        Criterion::Bic,
        Criterion::Aic,
        Criterion::Aic3,
        Criterion::Caic,
        Criterion::Nec,
        Criterion::Nec1,
        Criterion::Nec2,
        Criterion::Clc,
        Criterion::IclBic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Bic => "BIC",
            Criterion::Aic => "AIC",
            Criterion::Aic3 => "AIC3",
            Criterion::Caic => "CAIC",
            Criterion::Nec => "NEC",
            Criterion::Nec1 => "NEC1",
            Criterion::Nec2 => "NEC2",
            Criterion::Clc => "CLC",
            Criterion::IclBic => "ICL-BIC",
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(
            self,
            Criterion::Nec | Criterion::Nec1 | Criterion::Nec2 | Criterion::Clc | Criterion::IclBic
        )
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown criterion {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoglikCriteria {
    pub aic: f64,
    pub bic: f64,
    pub aic3: f64,
    pub caic: f64,
}

/// AIC, BIC, AIC₃ and CAIC from `ℓ̂`, `#par` and `n`.
pub fn loglik_criteria(loglik: f64, n_params: usize, n: u64) -> LoglikCriteria {
    let dev = -2.0 * loglik;
    let p = n_params as f64;
    let log_n = (n as f64).ln();
    let bic = dev + p * log_n;
    LoglikCriteria {
        aic: dev + 2.0 * p,
        bic,
        aic3: dev + 3.0 * p,
        caic: bic + p,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationCriteria {
    #[serde(with = "crate::io::extended_float")]
    pub nec: f64,
    #[serde(with = "crate::io::extended_float")]
    pub nec1: f64,
    #[serde(with = "crate::io::extended_float")]
    pub nec2: f64,
    pub clc: f64,
    pub icl_bic: f64,
    /// `ℓ̂_k ≤ ℓ̂_1` at `k ≥ 2`: the NEC family is `+∞`.
    pub degenerate_nec: bool,
}

/// NEC, NEC₁, NEC₂, CLC and ICL-BIC. The NEC family is 1 at `k = 1`.
pub fn classification_criteria(
    loglik_k: f64,
    loglik_1: f64,
    bic_k: f64,
    entropies: Entropies,
    k: usize,
) -> ClassificationCriteria {
    let clc = -2.0 * loglik_k + 2.0 * entropies.exact;
    let icl_bic = bic_k + 2.0 * entropies.exact;
    if k <= 1 {
        return ClassificationCriteria {
            nec: 1.0,
            nec1: 1.0,
            nec2: 1.0,
            clc,
            icl_bic,
            degenerate_nec: false,
        };
    }
    let gain = loglik_k - loglik_1;
    if !(gain > 0.0) {
        return ClassificationCriteria {
            nec: f64::INFINITY,
            nec1: f64::INFINITY,
            nec2: f64::INFINITY,
            clc,
            icl_bic,
            degenerate_nec: true,
        };
    }
    ClassificationCriteria {
        nec: entropies.exact / gain,
        nec1: entropies.marginal / gain,
        nec2: entropies.normalized / gain,
        clc,
        icl_bic,
        degenerate_nec: false,
    }
}

/// Every index for one fitted `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValues {
    pub k: usize,
    pub loglik: f64,
    pub n_params: usize,
    pub n: u64,
    pub en: f64,
    pub en1: f64,
    pub en2: f64,
    pub aic: f64,
    pub bic: f64,
    pub aic3: f64,
    pub caic: f64,
    #[serde(with = "crate::io::extended_float")]
    pub nec: f64,
    #[serde(with = "crate::io::extended_float")]
    pub nec1: f64,
    #[serde(with = "crate::io::extended_float")]
    pub nec2: f64,
    pub clc: f64,
    pub icl_bic: f64,
    pub degenerate_nec: bool,
}

impl CriterionValues {
    pub fn compute(k: usize, loglik: f64, n_params: usize, n: u64, entropies: Entropies, loglik_1: f64) -> Self {
        let l = loglik_criteria(loglik, n_params, n);
        let c = classification_criteria(loglik, loglik_1, l.bic, entropies, k);
        Self {
            k,
            loglik,
            n_params,
            n,
            en: entropies.exact,
            en1: entropies.marginal,
            en2: entropies.normalized,
            aic: l.aic,
            bic: l.bic,
            aic3: l.aic3,
            caic: l.caic,
            nec: c.nec,
            nec1: c.nec1,
            nec2: c.nec2,
            clc: c.clc,
            icl_bic: c.icl_bic,
            degenerate_nec: c.degenerate_nec,
        }
    }

    pub fn get(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Bic => self.bic,
            Criterion::Aic => self.aic,
            Criterion::Aic3 => self.aic3,
            Criterion::Caic => self.caic,
            Criterion::Nec => self.nec,
            Criterion::Nec1 => self.nec1,
            Criterion::Nec2 => self.nec2,
            Criterion::Clc => self.clc,
            Criterion::IclBic => self.icl_bic,
        }
    }
}

/// Criterion values for fits at `k = 1, 2, …` on one dataset.
///
/// `fits[i]` must be the fit with `k = i + 1`.
pub fn evaluate_fits(fits: &[FitResult], dataset: &Dataset) -> Result<Vec<CriterionValues>> {
    let first = fits
        .first()
        .ok_or_else(|| Error::InvalidConfig("no fits to evaluate".into()))?;
    if first.spec.states != 1 {
        return Err(Error::InvalidConfig("fits must start at k = 1".into()));
    }
    let loglik_1 = first.log_likelihood;
    fits.iter()
        .enumerate()
        .map(|(i, f)| {
            if f.spec.states != i + 1 {
                return Err(Error::InvalidConfig(format!(
                    "fit {i} has k = {}, expected {}",
                    f.spec.states,
                    i + 1
                )));
            }
            let entropies = dataset_entropies(&f.params, &f.spec, dataset)?;
            Ok(CriterionValues::compute(
                f.spec.states,
                f.log_likelihood,
                f.n_params,
                dataset.n(),
                entropies,
                loglik_1,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// The `k` just before the first increase of the index.
    #[default]
    FirstIncrease,
    /// The (first) global minimizer over the examined range.
    GlobalMinimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub criterion: Criterion,
    pub k: usize,
    /// The selected `k` is the largest examined one without the rule having
    /// been triggered inside the range.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rule: SelectionRule,
    pub k_min: usize,
    pub k_max: usize,
    pub values: Vec<CriterionValues>,
    pub selections: Vec<Selection>,
}

impl SelectionReport {
    pub fn selected(&self, criterion: Criterion) -> usize {
        self.selections
            .iter()
            .find(|s| s.criterion == criterion)
            .map(|s| s.k)
            .expect("every criterion has a selection")
    }
}

/// Position selected in `series` (index 0 ↔ smallest `k`), plus the boundary flag.
pub fn select_position(series: &[f64], rule: SelectionRule) -> (usize, bool) {
    if series.len() < 2 {
        return (0, true);
    }
    match rule {
        SelectionRule::FirstIncrease => {
            for i in 0..series.len() - 1 {
                if series[i + 1] > series[i] {
                    return (i, false);
                }
            }
            (series.len() - 1, true)
        }
        SelectionRule::GlobalMinimum => {
            let mut best = 0;
            for (i, &x) in series.iter().enumerate() {
                if x < series[best] {
                    best = i;
                }
            }
            (best, best == series.len() - 1)
        }
    }
}

pub fn select_k(values: &[CriterionValues]) -> Result<SelectionReport> {
    select_k_with(values, SelectionRule::FirstIncrease)
}

/// Applies `rule` to every criterion over consecutive `k` starting at 1.
pub fn select_k_with(values: &[CriterionValues], rule: SelectionRule) -> Result<SelectionReport> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("no criterion values".into()));
    }
    for (i, v) in values.iter().enumerate() {
        if v.k != i + 1 {
            return Err(Error::InvalidConfig(format!(
                "criterion values must cover k = 1, 2, ... consecutively; position {i} has k = {}",
                v.k
            )));
        }
    }
    let selections = Criterion::ALL
        .into_iter()
        .map(|criterion| {
            let series: Vec<f64> = values.iter().map(|v| v.get(criterion)).collect();
            let (pos, boundary) = select_position(&series, rule);
            Selection {
                criterion,
                k: values[pos].k,
                boundary,
            }
        })
        .collect();
    Ok(SelectionReport {
        rule,
        k_min: 1,
        k_max: values.len(),
        values: values.to_vec(),
        selections,
    })
}
