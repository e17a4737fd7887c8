//! Brute-force reference implementations for the test suites and `verify`.
//!
//! Nothing here calls into [`crate::scoring`] or [`crate::search`]: the
//! marginal likelihood is rebuilt case by case from posterior predictive
//! probabilities, local posteriors are normalized locally, and the network
//! decision is found by folding back the full sequential decision tree.
//! Speed is not a goal.

use crate::dataset::CategoricalDataset;
use crate::decision::RiskReport;
use crate::error::{Error, Result};
use crate::loss::{LossTable, NetworkLoss, PairwiseLoss};
use crate::modelspace::{enumerate_lattice, global_sum, DagModel, LocalModel, SubsetMask};
use crate::scoring::{DirichletPrior, LocalPosterior, ModelPrior, PriorScheme};
use crate::search::LearnConfig;

/// Largest product of lattice sizes the folding oracle accepts.
pub const MAX_FOLD_STATES: usize = 1_000_000;
/// Largest number of leaves the folding oracle will expand.
pub const MAX_FOLD_LEAVES: usize = 50_000_000;

fn cell_hyperparameter(prior: &DirichletPrior, c: usize, configs: usize) -> Result<f64> {
    let a = match prior.scheme {
        PriorScheme::UniformPrecision => prior.total_precision / (c * configs) as f64,
        PriorScheme::FixedCell(v) => v,
    };
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Prior(format!(
            "cell hyperparameter {a} is not positive"
        )));
    }
    Ok(a)
}

/// Sequential-predictive log marginal likelihood of one family.
pub fn polya_urn_family(
    dataset: &CategoricalDataset,
    child: usize,
    parents: &[usize],
    prior: &DirichletPrior,
) -> Result<f64> {
    if parents.contains(&child) {
        return Err(Error::InvalidFamily(
            "child listed among its parents".into(),
        ));
    }
    let c = dataset.cardinality(child);
    let mut configs = 1usize;
    for &p in parents {
        configs *= dataset.cardinality(p);
    }
    let a = cell_hyperparameter(prior, c, configs)?;
    let mut cell = vec![0u64; configs * c];
    let mut config = vec![0u64; configs];
    let mut total = 0.0;
    for row in dataset.rows() {
        let mut j = 0;
        for &p in parents {
            j = j * dataset.cardinality(p) + row[p];
        }
        let k = row[child];
        let numerator = a + cell[j * c + k] as f64;
        let denominator = a * c as f64 + config[j] as f64;
        total += (numerator / denominator).ln();
        cell[j * c + k] += 1;
        config[j] += 1;
    }
    Ok(total)
}

/// `ln p(D | M)` as a sum over cases of log predictive probabilities.
pub fn polya_urn_marginal(
    dataset: &CategoricalDataset,
    dag: &DagModel,
    prior: &DirichletPrior,
) -> Result<f64> {
    if dag.num_variables() != dataset.num_variables() {
        return Err(Error::validation(
            "DAG and dataset disagree on the variable count",
        ));
    }
    let mut total = 0.0;
    for child in 0..dag.num_variables() {
        total += polya_urn_family(dataset, child, dag.parents(child), prior)?;
    }
    Ok(total)
}

/// Plain argmin over every column of `table`; lowest index wins ties.
pub fn exhaustive_select(
    lp: &LocalPosterior,
    table: &LossTable,
) -> Result<(LocalModel, RiskReport)> {
    if table.dim() != lp.probs.len() {
        return Err(Error::Dimension(format!(
            "table of {} states for a lattice of {}",
            table.dim(),
            lp.probs.len()
        )));
    }
    let mut risks = Vec::with_capacity(table.dim());
    for a in 0..table.dim() {
        let mut r = 0.0;
        for s in 0..table.dim() {
            r += table.get(s, a) * lp.probs[s];
        }
        risks.push(r);
    }
    let ties = lowest_ties(&risks);
    let best = ties[0];
    let model = LocalModel::new(lp.family.clone(), lp.masks[best])?;
    Ok((
        model,
        RiskReport {
            bayes_action: best,
            bayes_risk: risks[best],
            ties,
            risks,
        },
    ))
}

fn lowest_ties(values: &[f64]) -> Vec<usize> {
    let mut min = f64::INFINITY;
    let mut scale = 0.0f64;
    for &v in values {
        min = min.min(v);
        scale = scale.max(v.abs());
    }
    let tol = 1e-12 * scale;
    (0..values.len())
        .filter(|&i| values[i] - min <= tol)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub chosen: DagModel,
    pub global_bayes_risk: f64,
    /// Decision, chance and value nodes visited.
    pub tree_size: usize,
    /// Whether every decision node of a level picked the same action.
    pub branch_invariant: bool,
}

struct Stage {
    probs: Vec<f64>,
    masks: Vec<SubsetMask>,
    pairwise: Vec<PairwiseLoss>,
}

impl Stage {
    fn loss(&self, state: SubsetMask, action: SubsetMask) -> f64 {
        let mut l = 0.0;
        for (j, pl) in self.pairwise.iter().enumerate() {
            let in_state = state >> j & 1 == 1;
            let in_action = action >> j & 1 == 1;
            if in_action && !in_state {
                l += pl.l0;
            } else if in_state && !in_action {
                l += pl.l1;
            }
        }
        l
    }
}

struct Folder<'a> {
    stages: &'a [Stage],
    nodes: usize,
    // chosen action index per level, per decision node visited
    choices: Vec<Vec<usize>>,
}

impl Folder<'_> {
    /// Value of the decision node at `level` given the loss accumulated so far.
    fn decide(&mut self, level: usize, accumulated: f64) -> f64 {
        self.nodes += 1;
        if level == self.stages.len() {
            return accumulated;
        }
        let stage = &self.stages[level];
        let mut expected = Vec::with_capacity(stage.masks.len());
        for &action in &stage.masks {
            // chance node: nature reveals this child's true parent set
            self.nodes += 1;
            let mut value = 0.0;
            for (s, &state) in stage.masks.iter().enumerate() {
                let v = self.decide(level + 1, accumulated + stage.loss(state, action));
                value += stage.probs[s] * v;
            }
            expected.push(value);
        }
        let best = lowest_ties(&expected)[0];
        self.choices[level].push(best);
        expected[best]
    }
}

fn local_probs(
    dataset: &CategoricalDataset,
    child: usize,
    candidates: &[usize],
    masks: &[SubsetMask],
    prior: &DirichletPrior,
    model_prior: &ModelPrior,
) -> Result<Vec<f64>> {
    let mut logs = Vec::with_capacity(masks.len());
    for (i, &m) in masks.iter().enumerate() {
        let parents: Vec<usize> = (0..candidates.len())
            .filter(|j| m >> j & 1 == 1)
            .map(|j| candidates[j])
            .collect();
        let w = match model_prior {
            ModelPrior::Uniform => 0.0,
            ModelPrior::Weights(w) => w
                .get(i)
                .filter(|&&x| x > 0.0)
                .ok_or_else(|| Error::Prior("model prior weight missing or not positive".into()))?
                .ln(),
        };
        logs.push(w + polya_urn_family(dataset, child, &parents, prior)?);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Backward induction over the whole sequential decision tree: one decision
/// node per child (in ordering order), each followed by a chance node over
/// that child's lattice, with losses accumulated along every branch.
pub fn fold_sequential_tree(
    dataset: &CategoricalDataset,
    config: &LearnConfig,
) -> Result<FoldResult> {
    let NetworkLoss::Disintegrable(loss) = &config.loss else {
        return Err(Error::validation(
            "the folding oracle needs a globally disintegrable loss",
        ));
    };
    let families = config.families(dataset)?;
    let mut states = 1usize;
    let mut leaves = 1usize;
    for f in &families {
        states = states.saturating_mul(1 << f.q());
        leaves = leaves.saturating_mul(1 << (2 * f.q()));
    }
    if states > MAX_FOLD_STATES {
        return Err(Error::Capacity {
            what: "joint model space of the decision tree".into(),
            cap: MAX_FOLD_STATES,
            got: states,
        });
    }
    if leaves > MAX_FOLD_LEAVES {
        return Err(Error::Capacity {
            what: "leaves of the decision tree".into(),
            cap: MAX_FOLD_LEAVES,
            got: leaves,
        });
    }

    let sequence: Vec<usize> = config.ordering.order().to_vec();
    let mut stages = Vec::with_capacity(sequence.len());
    for &child in &sequence {
        let fam = &families[child];
        let masks = enumerate_lattice(fam.q(), config.cap)?;
        let probs = local_probs(
            dataset,
            child,
            fam.candidates(),
            &masks,
            &config.prior,
            config.model_prior(child),
        )?;
        let pairwise = loss.for_family(fam).pairwise;
        stages.push(Stage {
            probs,
            masks,
            pairwise,
        });
    }

    let mut folder = Folder {
        stages: &stages,
        nodes: 0,
        choices: vec![Vec::new(); stages.len()],
    };
    let root = folder.decide(0, 0.0);

    let branch_invariant = folder.choices.iter().all(|c| c.iter().all(|&x| x == c[0]));
    // the first decision node recorded at each level lies on the branch of
    // the first actions and states; with branch invariance it is the choice
    let mut locals: Vec<Option<LocalModel>> = vec![None; families.len()];
    for (level, &child) in sequence.iter().enumerate() {
        let pick = *folder.choices[level].first().unwrap_or(&0);
        locals[child] = Some(LocalModel::new(
            families[child].clone(),
            stages[level].masks[pick],
        )?);
    }
    let locals: Vec<LocalModel> = locals.into_iter().map(Option::unwrap).collect();
    let chosen = global_sum(&locals, &config.ordering)?;
    Ok(FoldResult {
        chosen,
        global_bayes_risk: root,
        tree_size: folder.nodes,
        branch_invariant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VariableSpec;
    use crate::loss::{zero_one, DisintegrableLoss};
    use crate::modelspace::{CandidateParents, VariableOrdering};
    use crate::search::{arc_decision, ArcDecision};

    fn binary(name: &str) -> VariableSpec {
        VariableSpec::new(name, vec!["0".into(), "1".into()]).unwrap()
    }

    #[test]
    fn urn_trivial_values() {
        let d = CategoricalDataset::new(vec![binary("A")], vec![]).unwrap();
        let prior = DirichletPrior::uniform(2.0);
        assert_eq!(
            polya_urn_marginal(&d, &DagModel::empty(1), &prior).unwrap(),
            0.0
        );
        let d = CategoricalDataset::new(vec![binary("A")], vec![vec![1]]).unwrap();
        let s = polya_urn_marginal(&d, &DagModel::empty(1), &prior).unwrap();
        assert!((s - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn urn_two_cases_is_one_sixth() {
        let d = CategoricalDataset::new(vec![binary("A")], vec![vec![0], vec![1]]).unwrap();
        let s = polya_urn_marginal(&d, &DagModel::empty(1), &DirichletPrior::uniform(2.0)).unwrap();
        // 1/2 * 1/3
        assert!((s - (1.0f64 / 6.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_zero_one_is_map() {
        let fam = CandidateParents::unchecked(0, vec![1, 2]);
        let lp = LocalPosterior::from_probs(fam, vec![0.1, 0.4, 0.4, 0.1]).unwrap();
        let (m, r) = exhaustive_select(&lp, &zero_one(4).unwrap()).unwrap();
        assert_eq!(m.mask(), 0b01);
        assert_eq!(r.ties, vec![1, 2]);
    }

    #[test]
    fn fold_single_pair_is_arc_decision() {
        let vars = vec![binary("A"), binary("B")];
        let rows: Vec<Vec<usize>> = (0..12).map(|t| vec![t % 2, (t / 3) % 2]).collect();
        let d = CategoricalDataset::new(vars, rows).unwrap();
        let pl = PairwiseLoss::new(1.3, 0.9).unwrap();
        let cfg = LearnConfig::new(
            VariableOrdering::identity(2),
            NetworkLoss::Disintegrable(DisintegrableLoss::uniform(pl)),
        );
        let fold = fold_sequential_tree(&d, &cfg).unwrap();
        let fam = CandidateParents::unchecked(1, vec![0]);
        let masks = enumerate_lattice(1, 12).unwrap();
        let probs = local_probs(
            &d,
            1,
            fam.candidates(),
            &masks,
            &cfg.prior,
            &ModelPrior::Uniform,
        )
        .unwrap();
        let include = arc_decision(probs[1], pl) == ArcDecision::Include;
        assert_eq!(fold.chosen.has_arc(0, 1), include);
        assert!(fold.branch_invariant);
    }

    #[test]
    fn fold_uniform_symmetric_gives_null_model() {
        let d = CategoricalDataset::new((0..3).map(|i| binary(&format!("V{i}"))).collect(), vec![])
            .unwrap();
        let cfg = LearnConfig::new(
            VariableOrdering::identity(3),
            NetworkLoss::Disintegrable(DisintegrableLoss::uniform(
                PairwiseLoss::symmetric(1.0).unwrap(),
            )),
        );
        let fold = fold_sequential_tree(&d, &cfg).unwrap();
        assert_eq!(fold.chosen, DagModel::empty(3));
        // three arcs, each with risk 1/2 whichever way it is decided
        assert!((fold.global_bayes_risk - 1.5).abs() < 1e-12);
    }

    #[test]
    fn fold_refuses_general_losses() {
        let d = CategoricalDataset::new(vec![binary("A")], vec![]).unwrap();
        let cfg = LearnConfig::new(VariableOrdering::identity(1), NetworkLoss::ZeroOne);
        assert!(fold_sequential_tree(&d, &cfg).is_err());
    }
}
