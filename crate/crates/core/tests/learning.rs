mod common;

use std::collections::BTreeMap;

use bnselect::loss::{ArcId, NetworkLoss};
use bnselect::modelspace::VariableOrdering;
use bnselect::search::k2_greedy;
use bnselect::verify::{random_dataset, random_pairwise};
use bnselect::{learn, DirichletPrior, DisintegrableLoss, LearnConfig, PairwiseLoss};
use proptest::prelude::*;

fn ordering() -> VariableOrdering {
    VariableOrdering::identity(5)
}

#[test]
fn benchmark_recovered_under_zero_one() {
    let d = common::benchmark_sample();
    let (truth, _) = common::benchmark_network();
    let out = learn(&d, &LearnConfig::new(ordering(), NetworkLoss::ZeroOne)).unwrap();
    assert_eq!(out.dag, truth);
}

#[test]
fn k2_agrees_on_the_benchmark() {
    let d = common::benchmark_sample();
    let (truth, _) = common::benchmark_network();
    let k2 = k2_greedy(&d, &ordering(), &DirichletPrior::k2(), 4).unwrap();
    assert_eq!(k2.dag, truth);
}

#[test]
fn costly_additions_give_a_subgraph() {
    let d = common::benchmark_sample();
    let zero_one = learn(&d, &LearnConfig::new(ordering(), NetworkLoss::ZeroOne)).unwrap();
    for l0 in [2.0, 50.0, 1e6, 1e300] {
        let loss = DisintegrableLoss::uniform(PairwiseLoss::new(l0, 1.0).unwrap());
        let out = learn(
            &d,
            &LearnConfig::new(ordering(), NetworkLoss::Disintegrable(loss)),
        )
        .unwrap();
        assert!(
            out.dag.is_subgraph_of(&zero_one.dag),
            "l0 = {l0}: {}",
            out.dag
        );
    }
}

#[test]
fn per_arc_override_only_affects_its_arc() {
    // small enough that every arc keeps a representable absence probability
    let (truth, cpts) = common::benchmark_network();
    let d = bnselect::dataset::sample_network(&truth, &cpts, 300, common::BENCHMARK_SEED).unwrap();
    let mut loss = DisintegrableLoss::uniform(PairwiseLoss::symmetric(1.0).unwrap());
    loss.overrides
        .insert(ArcId::new(3, 4), PairwiseLoss::new(1e300, 1.0).unwrap());
    let out = learn(
        &d,
        &LearnConfig::new(ordering(), NetworkLoss::Disintegrable(loss)),
    )
    .unwrap();
    assert!(!out.dag.has_arc(3, 4));
    assert!(out.dag.has_arc(0, 1) && out.dag.has_arc(2, 3));
}

#[test]
fn general_table_path_matches_state_count_expectations() {
    let d = common::benchmark_sample();
    let out = learn(
        &d,
        &LearnConfig::new(ordering(), NetworkLoss::StateCount { h: 1.0, k: 1.0 }),
    )
    .unwrap();
    assert!(out.dag.is_consistent_with(&ordering()));
    assert!(out
        .diagnostics
        .children
        .iter()
        .all(|c| c.local_bayes_risk >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn learned_dags_respect_the_ordering(seed in any::<u64>(), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = random_dataset(&mut rng, 4, 3, 30);
        let mut order: Vec<usize> = (0..4).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let ordering = VariableOrdering::new(order).unwrap();
        let loss = DisintegrableLoss {
            default: random_pairwise(&mut rng),
            overrides: BTreeMap::new(),
        };
        let out = learn(&d, &LearnConfig::new(ordering.clone(), NetworkLoss::Disintegrable(loss))).unwrap();
        prop_assert!(out.dag.is_consistent_with(&ordering));
        prop_assert!(out.dag.topological_order().is_ok());
        let z = learn(&d, &LearnConfig::new(ordering.clone(), NetworkLoss::ZeroOne)).unwrap();
        prop_assert!(z.dag.is_consistent_with(&ordering));
    }
}
