#![allow(dead_code)]

use std::path::PathBuf;

use bnselect::dataset::{sample_network, NetworkCpts};
use bnselect::formats::cpts_from_json;
use bnselect::{CategoricalDataset, DagModel};

pub const BENCHMARK_SEED: u64 = 2024;
pub const BENCHMARK_N: usize = 5000;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn benchmark_network() -> (DagModel, NetworkCpts) {
    let text = std::fs::read_to_string(data_path("benchmark_cpts.json")).unwrap();
    cpts_from_json(&text).unwrap()
}

pub fn benchmark_sample() -> CategoricalDataset {
    let (dag, cpts) = benchmark_network();
    sample_network(&dag, &cpts, BENCHMARK_N, BENCHMARK_SEED).unwrap()
}

/// Two binary variables, `Y | X` with probabilities 0.9 / 0.1 of agreeing.
pub fn associated_pair(n: usize, seed: u64) -> CategoricalDataset {
    let text = r#"{
        "X": {"table": [[0.5, 0.5]]},
        "Y": {"parents": ["X"], "table": [[0.9, 0.1], [0.1, 0.9]]}
    }"#;
    let (dag, cpts) = cpts_from_json(text).unwrap();
    sample_network(&dag, &cpts, n, seed).unwrap()
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
