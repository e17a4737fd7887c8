//! Per-child Bayes selection and the network learner built on it.
//!
//! With a disintegrable loss the risk of choosing parent subset `T` splits
//! over arcs:
//!
//! ```text
//! R(T) = Σ_{j ∈ T} l0_j (1 - P_j) + Σ_{j ∉ T} l1_j P_j
//! ```
//!
//! where `P_j` is the posterior probability of arc `j`. Each arc can then be
//! decided on its own by the sign of `Δ_j = l1_j P_j - l0_j (1 - P_j)`, the
//! drop in risk from adding it. General loss tables fall back to exhaustive
//! minimization over the lattice.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dataset::CategoricalDataset;
use crate::decision::{bayes_action, Posterior};
use crate::error::{Error, Result};
use crate::loss::{LocalLoss, LossTable, NetworkLoss, PairwiseLoss};
use crate::modelspace::{
    global_sum, CandidateParents, DagModel, LocalModel, SubsetMask, VariableOrdering,
    DEFAULT_PARENT_CAP, MAX_PARENT_CAP,
};
use crate::scoring::{
    family_log_marginal, local_posterior, DirichletPrior, LocalPosterior, ModelPrior,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcDecision {
    Include,
    Exclude,
    Tie,
}

/// `Δ_j = R_0 - R_j`: how much adding arc `j` lowers the risk.
pub fn risk_differential(arc_probability: f64, loss: PairwiseLoss) -> f64 {
    loss.l1 * arc_probability - loss.l0 * (1.0 - arc_probability)
}

pub fn arc_decision(arc_probability: f64, loss: PairwiseLoss) -> ArcDecision {
    let delta = risk_differential(arc_probability, loss);
    if delta > 0.0 {
        ArcDecision::Include
    } else if delta < 0.0 {
        ArcDecision::Exclude
    } else {
        ArcDecision::Tie
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPath {
    Linear,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcDiagnostic {
    pub parent: usize,
    pub probability: f64,
    /// Present when the linear rule made the decision.
    pub delta: Option<f64>,
    pub decision: Option<ArcDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalDiagnostics {
    pub child: usize,
    pub q: usize,
    pub lattice_size: usize,
    pub path: SelectionPath,
    pub arcs: Vec<ArcDiagnostic>,
    pub selected: Vec<usize>,
    pub local_bayes_risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSelection {
    pub model: LocalModel,
    pub diagnostics: LocalDiagnostics,
}

/// Decides a child's parent set from an already computed lattice posterior.
pub fn select_from_posterior(lp: &LocalPosterior, loss: &LocalLoss) -> Result<LocalSelection> {
    match loss {
        LocalLoss::Disintegrable(d) => {
            if d.q() != lp.q() {
                return Err(Error::Dimension(format!(
                    "{} pairwise losses for {} candidates",
                    d.q(),
                    lp.q()
                )));
            }
            select_linear(lp, &d.pairwise)
        }
        LocalLoss::Table(t) => select_exhaustive(lp, t),
    }
}

/// The per-arc rule: `q` comparisons once the arc probabilities are known.
pub fn select_linear(lp: &LocalPosterior, pairwise: &[PairwiseLoss]) -> Result<LocalSelection> {
    let family = &lp.family;
    let mut mask: SubsetMask = 0;
    let mut bayes_risk = 0.0;
    let mut arcs = Vec::with_capacity(family.q());
    for (j, (&parent, &pl)) in family.candidates().iter().zip(pairwise).enumerate() {
        let p = lp.arc_probability(j);
        let absent = lp.arc_absence_probability(j);
        let delta = pl.l1 * p - pl.l0 * absent;
        let decision = if delta > 0.0 {
            ArcDecision::Include
        } else if delta < 0.0 {
            ArcDecision::Exclude
        } else {
            ArcDecision::Tie
        };
        if decision == ArcDecision::Include {
            mask |= 1 << j;
            bayes_risk += pl.l0 * absent;
        } else {
            bayes_risk += pl.l1 * p;
        }
        arcs.push(ArcDiagnostic {
            parent,
            probability: p,
            delta: Some(delta),
            decision: Some(decision),
        });
    }
    let model = LocalModel::new(family.clone(), mask)?;
    Ok(LocalSelection {
        diagnostics: LocalDiagnostics {
            child: family.child(),
            q: family.q(),
            lattice_size: lp.masks.len(),
            path: SelectionPath::Linear,
            arcs,
            selected: model.parents(),
            local_bayes_risk: bayes_risk,
        },
        model,
    })
}

/// Minimizes risk over every action of a lattice-ordered table.
pub fn select_exhaustive(lp: &LocalPosterior, table: &LossTable) -> Result<LocalSelection> {
    let family = &lp.family;
    if table.dim() != lp.masks.len() {
        return Err(Error::Dimension(format!(
            "loss table has {} states but child {} has a lattice of {} subsets",
            table.dim(),
            family.child(),
            lp.masks.len()
        )));
    }
    let report = bayes_action(table, &Posterior::new(lp.probs.clone())?)?;
    let model = LocalModel::new(family.clone(), lp.masks[report.bayes_action])?;
    let arcs = family
        .candidates()
        .iter()
        .enumerate()
        .map(|(j, &parent)| ArcDiagnostic {
            parent,
            probability: lp.arc_probability(j),
            delta: None,
            decision: None,
        })
        .collect();
    Ok(LocalSelection {
        diagnostics: LocalDiagnostics {
            child: family.child(),
            q: family.q(),
            lattice_size: lp.masks.len(),
            path: SelectionPath::Exhaustive,
            arcs,
            selected: model.parents(),
            local_bayes_risk: report.bayes_risk,
        },
        model,
    })
}

/// Scores the child's lattice and picks its Bayes parent set.
pub fn select_local(
    dataset: &CategoricalDataset,
    family: &CandidateParents,
    prior: &DirichletPrior,
    model_prior: &ModelPrior,
    loss: &LocalLoss,
    cap: usize,
) -> Result<LocalSelection> {
    let lp = local_posterior(dataset, family, prior, model_prior, cap)?;
    select_from_posterior(&lp, loss)
}

/// Everything [`learn`] needs besides the data.
#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub ordering: VariableOrdering,
    /// Candidate lists replacing "all predecessors" for specific children.
    pub candidate_overrides: BTreeMap<usize, Vec<usize>>,
    pub prior: DirichletPrior,
    pub model_priors: BTreeMap<usize, ModelPrior>,
    pub loss: NetworkLoss,
    pub cap: usize,
}

impl LearnConfig {
    pub fn new(ordering: VariableOrdering, loss: NetworkLoss) -> Self {
        Self {
            ordering,
            candidate_overrides: BTreeMap::new(),
            prior: DirichletPrior::default(),
            model_priors: BTreeMap::new(),
            loss,
            cap: DEFAULT_PARENT_CAP,
        }
    }

    /// Candidate parents of every variable, in variable-index order.
    pub fn families(&self, dataset: &CategoricalDataset) -> Result<Vec<CandidateParents>> {
        let n = dataset.num_variables();
        if self.ordering.len() != n {
            return Err(Error::Ordering(format!(
                "ordering covers {} variables, dataset has {n}",
                self.ordering.len()
            )));
        }
        let cap = self.cap.min(MAX_PARENT_CAP);
        (0..n)
            .map(|child| {
                let candidates = self
                    .candidate_overrides
                    .get(&child)
                    .cloned()
                    .unwrap_or_else(|| self.ordering.predecessors(child).to_vec());
                if candidates.len() > cap {
                    return Err(Error::Capacity {
                        what: format!("candidate parents of `{}`", dataset.variable(child).name()),
                        cap,
                        got: candidates.len(),
                    });
                }
                CandidateParents::new(child, candidates, &self.ordering, cap)
            })
            .collect()
    }

    pub fn model_prior(&self, child: usize) -> &ModelPrior {
        static UNIFORM: ModelPrior = ModelPrior::Uniform;
        self.model_priors.get(&child).unwrap_or(&UNIFORM)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnDiagnostics {
    pub children: Vec<LocalDiagnostics>,
    pub total_bayes_risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub dag: DagModel,
    pub locals: Vec<LocalModel>,
    pub diagnostics: LearnDiagnostics,
}

/// Independent local selection per child, assembled with `⊎`.
pub fn learn(dataset: &CategoricalDataset, config: &LearnConfig) -> Result<LearnOutcome> {
    config.prior.validate()?;
    let families = config.families(dataset)?;
    let mut locals = Vec::with_capacity(families.len());
    let mut children = Vec::with_capacity(families.len());
    for family in &families {
        let loss = config.loss.local(family, dataset)?;
        let sel = select_local(
            dataset,
            family,
            &config.prior,
            config.model_prior(family.child()),
            &loss,
            config.cap,
        )?;
        locals.push(sel.model);
        children.push(sel.diagnostics);
    }
    let dag = global_sum(&locals, &config.ordering)?;
    let total_bayes_risk = children.iter().map(|c| c.local_bayes_risk).sum();
    Ok(LearnOutcome {
        dag,
        locals,
        diagnostics: LearnDiagnostics {
            children,
            total_bayes_risk,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct K2Outcome {
    pub dag: DagModel,
    pub family_scores: Vec<f64>,
}

/// Greedy bottom-up parent addition maximizing the family marginal likelihood.
pub fn k2_greedy(
    dataset: &CategoricalDataset,
    ordering: &VariableOrdering,
    prior: &DirichletPrior,
    max_parents: usize,
) -> Result<K2Outcome> {
    prior.validate()?;
    let n = dataset.num_variables();
    if ordering.len() != n {
        return Err(Error::Ordering(format!(
            "ordering covers {} variables, dataset has {n}",
            ordering.len()
        )));
    }
    let mut parents = vec![Vec::new(); n];
    let mut scores = vec![0.0; n];
    for child in 0..n {
        let mut current: Vec<usize> = Vec::new();
        let mut score = family_log_marginal(&dataset.count(child, &current)?, prior)?;
        let mut remaining = ordering.predecessors(child).to_vec();
        while current.len() < max_parents && !remaining.is_empty() {
            let mut best: Option<(usize, f64)> = None;
            for (idx, &cand) in remaining.iter().enumerate() {
                let mut trial = current.clone();
                trial.push(cand);
                let s = family_log_marginal(&dataset.count(child, &trial)?, prior)?;
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((idx, s));
                }
            }
            match best {
                Some((idx, s)) if s > score => {
                    current.push(remaining.remove(idx));
                    score = s;
                }
                _ => break,
            }
        }
        parents[child] = current;
        scores[child] = score;
    }
    Ok(K2Outcome {
        dag: DagModel::from_parents(parents)?,
        family_scores: scores,
    })
}
