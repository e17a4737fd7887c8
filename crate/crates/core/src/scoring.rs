//! Dirichlet marginal likelihoods and posteriors over parent-set lattices.
//!
//! Everything is evaluated in the natural-log domain; Gamma-function products
//! overflow long before realistic sample sizes.

use serde::{Deserialize, Serialize};

use crate::dataset::{CategoricalDataset, ContingencyCounts};
use crate::error::{Error, Result};
use crate::modelspace::{
    enumerate_lattice, CandidateParents, DagModel, SubsetMask, MAX_PARENT_CAP,
};
use crate::numeric::ln_gamma;

/// How cell hyperparameters `α_ijk` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scheme", content = "value")]
pub enum PriorScheme {
    /// `α_ijk = α / (c_i · #configs)`: every family carries the same total
    /// precision and all prior predictive probabilities are uniform.
    UniformPrecision,
    /// The same value in every cell (1 is the K2 convention).
    FixedCell(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrior {
    pub total_precision: f64,
    #[serde(flatten)]
    pub scheme: PriorScheme,
}

impl Default for DirichletPrior {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl DirichletPrior {
    pub fn uniform(total_precision: f64) -> Self {
        Self {
            total_precision,
            scheme: PriorScheme::UniformPrecision,
        }
    }

    pub fn fixed_cell(value: f64) -> Self {
        Self {
            total_precision: 1.0,
            scheme: PriorScheme::FixedCell(value),
        }
    }

    /// The K2 default, `α_ijk = 1`.
    pub fn k2() -> Self {
        Self::fixed_cell(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::Prior(format!(
                "{what} must be positive and finite, got {v}"
            )))
        };
        match self.scheme {
            PriorScheme::UniformPrecision
                if !(self.total_precision > 0.0 && self.total_precision.is_finite()) =>
            {
                bad("total precision", self.total_precision)
            }
            PriorScheme::FixedCell(v) if !(v > 0.0 && v.is_finite()) => bad("fixed cell value", v),
            _ => Ok(()),
        }
    }

    /// `α_ijk` for a family with `child_cardinality` states and `configs`
    /// parent configurations.
    pub fn cell(&self, child_cardinality: usize, configs: usize) -> f64 {
        match self.scheme {
            PriorScheme::UniformPrecision => {
                self.total_precision / (child_cardinality as f64 * configs as f64)
            }
            PriorScheme::FixedCell(v) => v,
        }
    }
}

/// `ln p(D_i | Π_i)` for one family.
pub fn family_log_marginal(counts: &ContingencyCounts, prior: &DirichletPrior) -> Result<f64> {
    prior.validate()?;
    let c = counts.child_cardinality;
    let a_cell = prior.cell(c, counts.num_configurations());
    let a_config = a_cell * c as f64;
    if a_cell.is_nan() || a_cell <= 0.0 {
        return Err(Error::Prior(format!(
            "non-positive cell hyperparameter {a_cell}"
        )));
    }
    let ln_g_cell = ln_gamma(a_cell);
    let ln_g_config = ln_gamma(a_config);
    let mut total = 0.0;
    for (j, &n_j) in counts.config_totals.iter().enumerate() {
        if n_j == 0 {
            continue;
        }
        total += ln_g_config - ln_gamma(a_config + n_j as f64);
        for &n_jk in counts.config_row(j) {
            if n_jk > 0 {
                total += ln_gamma(a_cell + n_jk as f64) - ln_g_cell;
            }
        }
    }
    Ok(total)
}

/// Per-family log marginal likelihoods of a DAG, in variable order.
pub fn family_scores(
    dataset: &CategoricalDataset,
    dag: &DagModel,
    prior: &DirichletPrior,
) -> Result<Vec<f64>> {
    if dag.num_variables() != dataset.num_variables() {
        return Err(Error::validation(format!(
            "DAG has {} variables, dataset has {}",
            dag.num_variables(),
            dataset.num_variables()
        )));
    }
    (0..dag.num_variables())
        .map(|i| family_log_marginal(&dataset.count(i, dag.parents(i))?, prior))
        .collect()
}

/// `ln p(D | M)`: the sum of the family scores.
pub fn global_log_marginal(
    dataset: &CategoricalDataset,
    dag: &DagModel,
    prior: &DirichletPrior,
) -> Result<f64> {
    Ok(family_scores(dataset, dag, prior)?.iter().sum())
}

/// `p(D|M0) / p(D|M1)` under equal model priors.
pub fn bayes_factor(
    dataset: &CategoricalDataset,
    m0: &DagModel,
    m1: &DagModel,
    prior: &DirichletPrior,
) -> Result<f64> {
    Ok(log_bayes_factor(dataset, m0, m1, prior)?.exp())
}

pub fn log_bayes_factor(
    dataset: &CategoricalDataset,
    m0: &DagModel,
    m1: &DagModel,
    prior: &DirichletPrior,
) -> Result<f64> {
    Ok(global_log_marginal(dataset, m0, prior)? - global_log_marginal(dataset, m1, prior)?)
}

/// Prior weights over a child's lattice.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ModelPrior {
    #[default]
    Uniform,
    /// One positive weight per subset, in lattice order.
    Weights(Vec<f64>),
}

impl ModelPrior {
    fn log_weights(&self, size: usize) -> Result<Vec<f64>> {
        match self {
            ModelPrior::Uniform => Ok(vec![0.0; size]),
            ModelPrior::Weights(w) => {
                if w.len() != size {
                    return Err(Error::Dimension(format!(
                        "model prior has {} weights, lattice has {size} subsets",
                        w.len()
                    )));
                }
                w.iter()
                    .map(|&x| {
                        if x > 0.0 && x.is_finite() {
                            Ok(x.ln())
                        } else {
                            Err(Error::Prior(format!(
                                "model prior weight {x} is not positive; every subset needs support"
                            )))
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Posterior over one child's parent-subset lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPosterior {
    pub family: CandidateParents,
    /// Subsets in lattice order.
    pub masks: Vec<SubsetMask>,
    /// `ln p(M) + ln p(D_i | M)`, unnormalized.
    pub log_scores: Vec<f64>,
    pub probs: Vec<f64>,
}

impl LocalPosterior {
    /// Normalizes unnormalized log scores given in lattice order.
    pub fn from_log_scores(family: CandidateParents, log_scores: Vec<f64>) -> Result<Self> {
        let masks = enumerate_lattice(family.q(), MAX_PARENT_CAP)?;
        if log_scores.len() != masks.len() {
            return Err(Error::Dimension(format!(
                "{} log scores for a lattice of {} subsets",
                log_scores.len(),
                masks.len()
            )));
        }
        let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::validation("log scores must be finite"));
        }
        let weights: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / z).collect();
        Ok(Self {
            family,
            masks,
            log_scores,
            probs,
        })
    }

    /// Wraps an already-normalized probability vector (lattice order).
    pub fn from_probs(family: CandidateParents, probs: Vec<f64>) -> Result<Self> {
        let masks = enumerate_lattice(family.q(), MAX_PARENT_CAP)?;
        if probs.len() != masks.len() {
            return Err(Error::Dimension(format!(
                "{} probabilities for a lattice of {} subsets",
                probs.len(),
                masks.len()
            )));
        }
        if probs.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(Error::validation("negative probability"));
        }
        let log_scores = probs.iter().map(|p| p.ln()).collect();
        Ok(Self {
            family,
            masks,
            log_scores,
            probs,
        })
    }

    pub fn q(&self) -> usize {
        self.family.q()
    }

    /// Posterior probability that candidate `j` is a parent.
    pub fn arc_probability(&self, j: usize) -> f64 {
        self.masks
            .iter()
            .zip(&self.probs)
            .filter(|(m, _)| *m >> j & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// Posterior probability that candidate `j` is not a parent, summed
    /// directly so it stays accurate when `P_j` rounds to 1.
    pub fn arc_absence_probability(&self, j: usize) -> f64 {
        self.masks
            .iter()
            .zip(&self.probs)
            .filter(|(m, _)| *m >> j & 1 == 0)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn arc_probabilities(&self) -> Vec<f64> {
        (0..self.q()).map(|j| self.arc_probability(j)).collect()
    }

    /// Index of the most probable subset; lowest lattice index on ties.
    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Scores every subset of `family` and normalizes over the lattice.
pub fn local_posterior(
    dataset: &CategoricalDataset,
    family: &CandidateParents,
    prior: &DirichletPrior,
    model_prior: &ModelPrior,
    cap: usize,
) -> Result<LocalPosterior> {
    let masks = enumerate_lattice(family.q(), cap)?;
    let log_w = model_prior.log_weights(masks.len())?;
    let mut log_scores = Vec::with_capacity(masks.len());
    for (&m, lw) in masks.iter().zip(&log_w) {
        let counts = dataset.count(family.child(), &family.parents_of(m))?;
        log_scores.push(lw + family_log_marginal(&counts, prior)?);
    }
    LocalPosterior::from_log_scores(family.clone(), log_scores)
}
