//! Randomized equivalence suites pitting the main path against [`crate::oracle`].
//!
//! Every trial draws its instance from its own seed, so a failure can be
//! replayed from the manifest it reports.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{CategoricalDataset, VariableSpec};
use crate::error::Result;
use crate::loss::{
    expand_local, ArcId, DisintegrableLoss, LocalDisintegrableLoss, NetworkLoss, PairwiseLoss,
};
use crate::modelspace::{CandidateParents, VariableOrdering, MAX_PARENT_CAP};
use crate::oracle::{exhaustive_select, fold_sequential_tree, polya_urn_family};
use crate::scoring::{family_log_marginal, DirichletPrior, LocalPosterior};
use crate::search::{learn, select_linear, ArcDecision, LearnConfig};

/// Failures kept per suite; the rest are only counted.
const MAX_REPORTED: usize = 5;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Trials per suite (per `q` for the linear-rule suite).
    pub trials: usize,
    pub seed: u64,
    /// Largest lattice order tried by the linear-rule suite.
    pub max_q: usize,
    /// Perturbs the main path so every suite must fail.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0x5eed,
            max_q: 6,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub trial: usize,
    pub trial_seed: u64,
    pub message: String,
    /// Enough to rebuild the instance.
    pub manifest: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub passed: usize,
    pub failures: Vec<Failure>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            trials: 0,
            passed: 0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, trial: usize, trial_seed: u64, outcome: Result<(), (String, Value)>) {
        self.trials += 1;
        match outcome {
            Ok(()) => self.passed += 1,
            Err((message, manifest)) => {
                if self.failures.len() < MAX_REPORTED {
                    self.failures.push(Failure {
                        trial,
                        trial_seed,
                        message,
                        manifest,
                    });
                }
            }
        }
    }

    pub fn failed(&self) -> usize {
        self.trials - self.passed
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.suites.iter().all(|s| s.failed() == 0)
    }

    pub fn total_trials(&self) -> usize {
        self.suites.iter().map(|s| s.trials).sum()
    }
}

/// Seed of trial `trial` of suite `salt`.
pub fn trial_seed(seed: u64, salt: u64, trial: usize) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn random_dataset(
    rng: &mut impl Rng,
    vars: usize,
    max_card: usize,
    n: usize,
) -> CategoricalDataset {
    let variables: Vec<VariableSpec> = (0..vars)
        .map(|i| {
            let c = rng.gen_range(2..=max_card);
            VariableSpec::new(
                format!("X{}", i + 1),
                (0..c).map(|k| k.to_string()).collect(),
            )
            .expect("distinct labels")
        })
        .collect();
    let rows = (0..n)
        .map(|_| {
            variables
                .iter()
                .map(|v| rng.gen_range(0..v.cardinality()))
                .collect()
        })
        .collect();
    CategoricalDataset::new(variables, rows).expect("in-range values")
}

/// Half uniform-precision, half fixed-cell.
pub fn random_prior(rng: &mut impl Rng) -> DirichletPrior {
    if rng.gen_bool(0.5) {
        DirichletPrior::uniform(rng.gen_range(0.2..12.0))
    } else {
        DirichletPrior::fixed_cell(rng.gen_range(0.1..3.0))
    }
}

pub fn random_pairwise(rng: &mut impl Rng) -> PairwiseLoss {
    PairwiseLoss::new(rng.gen_range(0.05..10.0), rng.gen_range(0.05..10.0)).expect("positive")
}

/// Random lattice probabilities; with `dyadic` they are multiples of
/// `2^-(q+3)` so sums over the lattice are exact.
pub fn random_lattice_probs(rng: &mut impl Rng, q: usize, dyadic: bool) -> Vec<f64> {
    let size = 1usize << q;
    if dyadic {
        let units = size << 3;
        let mut counts = vec![1u32; size];
        for _ in size..units {
            counts[rng.gen_range(0..size)] += 1;
        }
        counts.iter().map(|&c| c as f64 / units as f64).collect()
    } else {
        // occasionally concentrate mass to get extreme arc probabilities
        let power = if rng.gen_bool(0.3) { 6 } else { 1 };
        let w: Vec<f64> = (0..size)
            .map(|_| rng.gen::<f64>().powi(power) + 1e-12)
            .collect();
        let z: f64 = w.iter().sum();
        w.iter().map(|x| x / z).collect()
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Closed-form family score against the sequential urn, plus case-order invariance.
pub fn urn_trial(seed: u64, inject_fault: bool) -> Result<(), (String, Value)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = rng.gen_range(1..=4);
    let n = rng.gen_range(0..=30);
    let data = random_dataset(&mut rng, vars, 4, n);
    let child = rng.gen_range(0..vars);
    let mut others: Vec<usize> = (0..vars).filter(|&v| v != child).collect();
    others.shuffle(&mut rng);
    others.truncate(rng.gen_range(0..=others.len().min(3)));
    let prior = random_prior(&mut rng);
    let manifest = || {
        json!({
            "suite": "polya-urn",
            "trial_seed": seed,
            "data_csv": data.to_csv_string(),
            "child": child,
            "parents": others,
            "prior": prior,
        })
    };
    let fail = |msg: String| Err((msg, manifest()));

    let counts = match data.count(child, &others) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let mut closed = match family_log_marginal(&counts, &prior) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    if inject_fault {
        closed += 1e-3 * closed.abs().max(1.0);
    }
    let urn =
        polya_urn_family(&data, child, &others, &prior).map_err(|e| (e.to_string(), manifest()))?;
    if relative_gap(closed, urn) > 1e-9 {
        return fail(format!("closed form {closed} vs urn {urn}"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let shuffled = data
        .permuted(&perm)
        .map_err(|e| (e.to_string(), manifest()))?;
    let urn2 = polya_urn_family(&shuffled, child, &others, &prior)
        .map_err(|e| (e.to_string(), manifest()))?;
    if relative_gap(urn, urn2) > 1e-9 {
        return fail(format!(
            "urn score {urn} changes to {urn2} under case permutation"
        ));
    }
    Ok(())
}

/// The arc-by-arc rule against exhaustive minimization of the expanded table.
/// One trial in four plants exact ties on some arcs; returns how many.
pub fn linear_trial(seed: u64, q: usize, inject_fault: bool) -> Result<usize, (String, Value)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dyadic = rng.gen_range(0..4) == 0;
    let probs = random_lattice_probs(&mut rng, q, dyadic);
    let family = CandidateParents::unchecked(0, (1..=q).collect());
    let lp = LocalPosterior::from_probs(family, probs.clone()).expect("lattice-sized");
    let pairwise: Vec<PairwiseLoss> = (0..q)
        .map(|j| {
            if dyadic {
                let units = (1u64 << (q + 3)) as f64;
                let a = (lp.arc_probability(j) * units).round();
                if rng.gen_bool(0.5) && a > 0.0 && a < units {
                    // l1 P = l0 (1 - P) exactly
                    let scale = f64::from(rng.gen_range(1u32..=4));
                    PairwiseLoss::new(a * scale, (units - a) * scale).expect("positive")
                } else {
                    PairwiseLoss::new(
                        f64::from(rng.gen_range(1u32..=20)),
                        f64::from(rng.gen_range(1u32..=20)),
                    )
                    .expect("positive")
                }
            } else {
                random_pairwise(&mut rng)
            }
        })
        .collect();
    let manifest = || {
        json!({
            "suite": "linear-rule",
            "trial_seed": seed,
            "q": q,
            "probs": probs,
            "pairwise": pairwise,
        })
    };
    let fail = |msg: String| Err((msg, manifest()));

    let linear = select_linear(&lp, &pairwise).map_err(|e| (e.to_string(), manifest()))?;
    let mut linear_mask = linear.model.mask();
    if inject_fault {
        linear_mask ^= 1;
    }
    let table = expand_local(
        &LocalDisintegrableLoss::anonymous(pairwise.clone()),
        MAX_PARENT_CAP,
    )
    .map_err(|e| (e.to_string(), manifest()))?;
    let (model, report) =
        exhaustive_select(&lp, &table).map_err(|e| (e.to_string(), manifest()))?;
    if model.mask() != linear_mask {
        return fail(format!(
            "linear rule picks mask {linear_mask:#b}, exhaustive search picks {:#b} (ties {:?})",
            model.mask(),
            report.ties
        ));
    }
    let risk = linear.diagnostics.local_bayes_risk;
    if (risk - report.bayes_risk).abs() > 1e-12 * report.bayes_risk.abs().max(1.0) {
        return fail(format!(
            "linear Bayes risk {risk} vs exhaustive {}",
            report.bayes_risk
        ));
    }
    Ok(linear
        .diagnostics
        .arcs
        .iter()
        .filter(|a| a.decision == Some(ArcDecision::Tie))
        .count())
}

/// `learn` against folding back the full decision tree on a 3-variable network.
pub fn fold_trial(seed: u64, inject_fault: bool) -> Result<(), (String, Value)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(0..=50);
    let data = random_dataset(&mut rng, 3, 3, n);
    let mut order: Vec<usize> = (0..3).collect();
    order.shuffle(&mut rng);
    let ordering = VariableOrdering::new(order.clone()).expect("permutation");
    let mut loss = DisintegrableLoss::uniform(random_pairwise(&mut rng));
    for (pos, &child) in order.iter().enumerate() {
        for &parent in &order[..pos] {
            if rng.gen_bool(0.7) {
                loss.overrides
                    .insert(ArcId::new(parent, child), random_pairwise(&mut rng));
            }
        }
    }
    let prior = random_prior(&mut rng);
    let overrides: Vec<Value> = loss
        .overrides
        .iter()
        .map(|(a, pl)| json!({"parent": a.parent, "child": a.child, "l0": pl.l0, "l1": pl.l1}))
        .collect();
    let manifest = || {
        json!({
            "suite": "fold-vs-learn",
            "trial_seed": seed,
            "data_csv": data.to_csv_string(),
            "ordering": order,
            "prior": prior,
            "default_loss": loss.default,
            "arc_losses": overrides,
        })
    };
    let fail = |msg: String| Err((msg, manifest()));

    let mut config = LearnConfig::new(ordering, NetworkLoss::Disintegrable(loss.clone()));
    config.prior = prior;
    let learned = learn(&data, &config).map_err(|e| (e.to_string(), manifest()))?;
    let folded = fold_sequential_tree(&data, &config).map_err(|e| (e.to_string(), manifest()))?;
    let mut risk = learned.diagnostics.total_bayes_risk;
    if inject_fault {
        risk += 1e-6;
    }
    if learned.dag != folded.chosen {
        return fail(format!(
            "learn returns {} but folding back returns {}",
            learned.dag, folded.chosen
        ));
    }
    if (risk - folded.global_bayes_risk).abs() > 1e-10 {
        return fail(format!(
            "summed local Bayes risk {risk} vs root value {}",
            folded.global_bayes_risk
        ));
    }
    if !folded.branch_invariant {
        return fail("decision tree choices depend on earlier branches".into());
    }
    Ok(())
}

pub fn run(options: &VerifyOptions) -> VerifyReport {
    let mut urn = SuiteReport::new("polya-urn");
    for t in 0..options.trials {
        let s = trial_seed(options.seed, 1, t);
        urn.record(t, s, urn_trial(s, options.inject_fault));
    }
    let mut linear = SuiteReport::new("linear-rule");
    for q in 1..=options.max_q {
        for t in 0..options.trials {
            let s = trial_seed(options.seed, 2 + ((q as u64) << 8), t);
            linear.record(t, s, linear_trial(s, q, options.inject_fault).map(|_| ()));
        }
    }
    let mut fold = SuiteReport::new("fold-vs-learn");
    for t in 0..options.trials {
        let s = trial_seed(options.seed, 3, t);
        fold.record(t, s, fold_trial(s, options.inject_fault));
    }
    VerifyReport {
        seed: options.seed,
        suites: vec![urn, linear, fold],
    }
}
