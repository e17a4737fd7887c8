//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use bnselect::dataset::sample_network;
use bnselect::decision::{bayes_action, map_action, Posterior};
use bnselect::loss::{
    expand_local, fit_pairwise, state_count_loss, uniform_complexity_loss, zero_one,
    LocalDisintegrableLoss, NetworkLoss,
};
use bnselect::modelspace::{enumerate_lattice, VariableOrdering, MAX_PARENT_CAP};
use bnselect::verify::{fold_trial, linear_trial, random_pairwise, trial_seed, urn_trial};
use bnselect::{learn, DisintegrableLoss, LearnConfig, PairwiseLoss};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        ok: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        ok: false,
        detail: detail.into(),
    }
}

/// h and k values: the six named ones plus fourteen more between 0.5 and 20.
const HK: [f64; 20] = [
    0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.5, 8.0, 10.0, 12.0, 13.5, 15.0,
    16.0, 18.0, 20.0,
];

fn p_grid() -> impl Iterator<Item = f64> {
    (1..=20).map(|i| 0.25 * i as f64 / 21.0)
}

fn two_parent_posterior(p: f64) -> Posterior {
    Posterior::new(vec![1.0 - 4.0 * p, p, p, 2.0 * p]).unwrap()
}

fn state_count_risks() -> Outcome {
    let mut worst = 0.0f64;
    let mut points = 0;
    for p in p_grid() {
        for &h in &HK {
            for &k in &HK {
                let table = state_count_loss(&[2, 3], h, k).unwrap();
                let report = bayes_action(&table, &two_parent_posterior(p)).unwrap();
                let expected = [
                    6.0 * h * p,
                    2.0 * k - 3.0 * k * p + 2.0 * h * p,
                    3.0 * k - 7.0 * k * p + 2.0 * h * p,
                    5.0 * k - 15.0 * k * p,
                ];
                for (r, e) in report.risks.iter().zip(expected) {
                    let gap = (r - e).abs() / e.abs().max(1.0);
                    worst = worst.max(gap);
                    if gap > 1e-12 {
                        return fail(format!("p={p} h={h} k={k}: risk {r} vs {e}"));
                    }
                }
                points += 1;
            }
        }
    }
    pass(format!("{points} grid points, worst gap {worst:.1e}"))
}

/// The printed rule; `None` within 1e-9 of a boundary.
fn printed_rule(p: f64, h: f64, k: f64) -> Option<usize> {
    let b03 = 2.0 * k / (4.0 * h + 3.0 * k);
    let b323 = 3.0 * k / (12.0 * k + 2.0 * h);
    let b023 = 5.0 * k / (6.0 * h + 15.0 * k);
    let near = |b: f64| (p - b).abs() <= 1e-9;
    if 15.0 * k <= 8.0 * h {
        if near(b03) || near(b323) {
            return None;
        }
        Some(if p <= b03 {
            0
        } else if p <= b323 {
            1
        } else {
            3
        })
    } else {
        if near(b023) {
            return None;
        }
        Some(if p <= b023 { 0 } else { 3 })
    }
}

fn state_count_regimes() -> Outcome {
    let (mut checked, mut skipped) = (0, 0);
    let mut seen = [false; 4];
    for p in p_grid() {
        for &h in &HK {
            for &k in &HK {
                let Some(expected) = printed_rule(p, h, k) else {
                    skipped += 1;
                    continue;
                };
                let table = state_count_loss(&[2, 3], h, k).unwrap();
                let got = bayes_action(&table, &two_parent_posterior(p))
                    .unwrap()
                    .bayes_action;
                if got != expected {
                    return fail(format!(
                        "p={p} h={h} k={k}: action {got}, rule says {expected}"
                    ));
                }
                seen[got] = true;
                checked += 1;
            }
        }
    }
    if !(seen[0] && seen[1] && seen[3]) {
        return fail("grid does not reach every regime");
    }
    pass(format!(
        "{checked} points agree with the rule, {skipped} on a boundary skipped"
    ))
}

fn zero_one_is_map() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut tied = 0;
    for trial in 0..10_000 {
        let g = rng.gen_range(2..=64);
        let weights: Vec<f64> = if trial % 3 == 0 {
            // small integer weights give exact ties
            (0..g).map(|_| f64::from(rng.gen_range(0u32..=4))).collect()
        } else {
            (0..g).map(|_| rng.gen::<f64>()).collect()
        };
        if weights.iter().all(|&w| w == 0.0) {
            continue;
        }
        let post = Posterior::from_weights(&weights).unwrap();
        let report = bayes_action(&zero_one(g).unwrap(), &post).unwrap();
        let map = map_action(&post);
        if report.ties != map.ties || report.bayes_action != map.index {
            return fail(format!(
                "trial {trial}: Bayes ties {:?} vs MAP ties {:?}",
                report.ties, map.ties
            ));
        }
        if map.ties.len() > 1 {
            tied += 1;
        }
    }
    pass(format!("10000 posteriors, {tied} with tied modes"))
}

fn urn_oracle() -> Outcome {
    for t in 0..500 {
        let s = trial_seed(SEED, 4, t);
        if let Err((msg, manifest)) = urn_trial(s, false) {
            return fail(format!("trial {t}: {msg}; {manifest}"));
        }
    }
    pass("500 instances agree within 1e-9 and are permutation invariant")
}

fn linear_rule() -> Outcome {
    let mut ties = 0;
    for q in 1..=6 {
        for t in 0..1000 {
            let s = trial_seed(SEED, 5 + ((q as u64) << 8), t);
            match linear_trial(s, q, false) {
                Ok(n) => ties += n,
                Err((msg, manifest)) => return fail(format!("q={q} trial {t}: {msg}; {manifest}")),
            }
        }
    }
    if ties == 0 {
        return fail("no tied arcs were exercised");
    }
    pass(format!(
        "6000 trials, {ties} exactly tied arcs resolved alike"
    ))
}

fn folding_back() -> Outcome {
    for t in 0..200 {
        let s = trial_seed(SEED, 6, t);
        if let Err((msg, manifest)) = fold_trial(s, false) {
            return fail(format!("trial {t}: {msg}; {manifest}"));
        }
    }
    pass("200 instances: same DAG, risk within 1e-10")
}

fn closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let mut entries = 0;
    for trial in 0..200 {
        let q = rng.gen_range(1..=5);
        let d =
            LocalDisintegrableLoss::anonymous((0..q).map(|_| random_pairwise(&mut rng)).collect());
        let direct = expand_local(&d, MAX_PARENT_CAP).unwrap();
        let iterated = d.expand_iterated().unwrap().canonical();
        let masks = enumerate_lattice(q, MAX_PARENT_CAP).unwrap();
        for (s, &ms) in masks.iter().enumerate() {
            for (a, &ma) in masks.iter().enumerate() {
                let mut sym = 0.0;
                for (j, pl) in d.pairwise.iter().enumerate() {
                    if ma >> j & 1 == 1 && ms >> j & 1 == 0 {
                        sym += pl.l0;
                    } else if ms >> j & 1 == 1 && ma >> j & 1 == 0 {
                        sym += pl.l1;
                    }
                }
                let (x, y) = (direct.get(s, a), iterated.get(s, a));
                if x != y || x != sym {
                    return fail(format!("trial {trial} entry ({s},{a}): {x} / {y} / {sym}"));
                }
                entries += 1;
            }
        }
    }
    pass(format!("200 loss sets, {entries} entries identical"))
}

fn negative_control() -> Outcome {
    let mut shown = String::new();
    for h in [0.5, 2.0, 3.0, 10.0] {
        let table = uniform_complexity_loss(2, h).unwrap();
        match fit_pairwise(&table) {
            Ok(_) => return fail(format!("h={h}: table reproduced by a pairwise loss")),
            Err(v) => {
                if shown.is_empty() {
                    shown = format!(
                        "h={h}: entry ({},{}) should be {} but is {}",
                        v.state, v.action, v.expected, v.found
                    );
                }
            }
        }
    }
    pass(format!("no pairwise fit; {shown}"))
}

fn structure_recovery() -> Outcome {
    let (truth, cpts) = common::benchmark_network();
    let data = sample_network(&truth, &cpts, common::BENCHMARK_N, common::BENCHMARK_SEED).unwrap();
    let ordering = VariableOrdering::identity(5);
    let zero_one = learn(
        &data,
        &LearnConfig::new(ordering.clone(), NetworkLoss::ZeroOne),
    )
    .unwrap();
    if zero_one.dag != truth {
        return fail(format!(
            "0-1 loss learned {} instead of {truth}",
            zero_one.dag
        ));
    }
    let loss = DisintegrableLoss::uniform(PairwiseLoss::new(50.0, 1.0).unwrap());
    let cautious = learn(
        &data,
        &LearnConfig::new(ordering, NetworkLoss::Disintegrable(loss)),
    )
    .unwrap();
    if !cautious.dag.is_subgraph_of(&truth) {
        return fail(format!(
            "l0 = 50 l1 learned {}, not a subgraph",
            cautious.dag
        ));
    }
    pass(format!(
        "0-1 recovers all {} arcs; l0 = 50 l1 keeps {}",
        truth.num_arcs(),
        cautious.dag.num_arcs()
    ))
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "1 state-count risks",
            Some(Duration::from_secs(1)),
            state_count_risks,
        ),
        (
            "2 decision regimes",
            Some(Duration::from_secs(1)),
            state_count_regimes,
        ),
        ("3 zero-one is MAP", None, zero_one_is_map),
        ("4 urn oracle", Some(Duration::from_secs(10)), urn_oracle),
        ("5 linear rule", Some(Duration::from_secs(30)), linear_rule),
        (
            "6 folding back",
            Some(Duration::from_secs(30)),
            folding_back,
        ),
        ("7 closed form", None, closed_form),
        ("8 negative control", None, negative_control),
        (
            "9 structure recovery",
            Some(Duration::from_secs(10)),
            structure_recovery,
        ),
    ];
    let mut failures = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                outcome = fail(format!(
                    "{} (took {elapsed:.2?}, limit {limit:?})",
                    outcome.detail
                ));
            }
        }
        let status = if outcome.ok { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {name}: {} [{elapsed:.2?}]",
            outcome.detail
        );
        if !outcome.ok {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
