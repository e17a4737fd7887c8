//! On-disk formats: DOT and JSON DAGs, ordering files, CPT files, and the
//! JSON reports written by the CLI.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{CategoricalDataset, NetworkCpts, VariableSpec};
use crate::error::{Error, Result};
use crate::modelspace::{DagModel, VariableOrdering};
use crate::scoring::LocalPosterior;
use crate::search::{ArcDecision, LearnDiagnostics, LocalDiagnostics, SelectionPath};

fn dot_id(name: &str) -> String {
    let plain = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        name.to_owned()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

/// `digraph` with every node declared, then one `parent -> child;` per arc.
pub fn dag_to_dot(dag: &DagModel, names: &[&str]) -> String {
    let mut out = String::from("digraph G {\n");
    for name in names {
        out.push_str(&format!("  {};\n", dot_id(name)));
    }
    for (p, c) in dag.arcs() {
        out.push_str(&format!(
            "  {} -> {};\n",
            dot_id(names[p]),
            dot_id(names[c])
        ));
    }
    out.push_str("}\n");
    out
}

/// `{variable: [parents…]}` in variable order.
pub fn dag_to_json(dag: &DagModel, names: &[&str]) -> Value {
    let map: IndexMap<&str, Vec<&str>> = (0..dag.num_variables())
        .map(|c| (names[c], dag.parents(c).iter().map(|&p| names[p]).collect()))
        .collect();
    serde_json::to_value(map).expect("string map")
}

/// Parses a JSON DAG against known variable names. Variables that are not
/// keys have no parents.
pub fn dag_from_json(text: &str, names: &[&str]) -> Result<DagModel> {
    let map: IndexMap<String, Vec<String>> = serde_json::from_str(text)?;
    let lookup = |name: &str| {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::validation(format!("unknown variable `{name}`")))
    };
    let mut parents = vec![Vec::new(); names.len()];
    for (child, ps) in &map {
        let c = lookup(child)?;
        parents[c] = ps.iter().map(|p| lookup(p)).collect::<Result<_>>()?;
    }
    DagModel::from_parents(parents)
}

/// A single line of comma-separated variable names.
pub fn parse_ordering(text: &str, names: &[&str]) -> Result<VariableOrdering> {
    let line = text.trim();
    if line.lines().count() > 1 {
        return Err(Error::validation("ordering must be a single line"));
    }
    let order = line
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            names.iter().position(|n| *n == name).ok_or_else(|| {
                Error::validation(format!("ordering names unknown variable `{name}`"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if order.len() != names.len() {
        return Err(Error::validation(format!(
            "ordering lists {} variables, the data has {}",
            order.len(),
            names.len()
        )));
    }
    VariableOrdering::new(order)
}

pub fn ordering_to_line(ordering: &VariableOrdering, names: &[&str]) -> String {
    ordering
        .order()
        .iter()
        .map(|&i| names[i])
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptEntry {
    #[serde(default)]
    parents: Vec<String>,
    table: Vec<Vec<f64>>,
    #[serde(default)]
    states: Option<Vec<String>>,
}

/// Parses `{variable: {"parents": [...], "table": [[...]...], "states": [...]}}`.
///
/// The network structure is taken from the `parents` lists; table rows are
/// parent configurations in row-major order over that list.
pub fn cpts_from_json(text: &str) -> Result<(DagModel, NetworkCpts)> {
    let map: IndexMap<String, CptEntry> = serde_json::from_str(text)?;
    let names: Vec<&str> = map.keys().map(String::as_str).collect();
    let mut variables = Vec::with_capacity(map.len());
    for (name, entry) in &map {
        let width = entry.table.first().map_or(0, Vec::len);
        let labels = match &entry.states {
            Some(s) => s.clone(),
            None => (0..width).map(|k| k.to_string()).collect(),
        };
        variables.push(VariableSpec::new(name.clone(), labels)?);
    }
    let mut parents = Vec::with_capacity(map.len());
    for (name, entry) in &map {
        let ps = entry
            .parents
            .iter()
            .map(|p| {
                names.iter().position(|n| n == p).ok_or_else(|| {
                    Error::validation(format!("CPT for `{name}` names unknown parent `{p}`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        parents.push(ps);
    }
    let dag = DagModel::from_parents(parents)?;
    let cpts = NetworkCpts {
        variables,
        tables: map.into_values().map(|e| e.table).collect(),
    };
    Ok((dag, cpts))
}

pub fn cpts_to_json(dag: &DagModel, cpts: &NetworkCpts) -> Value {
    let map: IndexMap<&str, CptEntry> = cpts
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| {
            (
                v.name(),
                CptEntry {
                    parents: dag
                        .parents(i)
                        .iter()
                        .map(|&p| cpts.variables[p].name().to_owned())
                        .collect(),
                    table: cpts.tables[i].clone(),
                    states: Some(v.labels().to_vec()),
                },
            )
        })
        .collect();
    serde_json::to_value(map).expect("serializable")
}

#[derive(Debug, Serialize)]
struct SubsetView<'a> {
    parents: Vec<&'a str>,
    log_score: f64,
    prob: f64,
}

#[derive(Debug, Serialize)]
struct ArcProbView<'a> {
    parent: &'a str,
    #[serde(rename = "P")]
    p: f64,
}

pub fn posterior_json(lp: &LocalPosterior, dataset: &CategoricalDataset) -> Value {
    let name = |i: usize| dataset.variable(i).name();
    let subsets: Vec<SubsetView> = lp
        .masks
        .iter()
        .zip(lp.log_scores.iter().zip(&lp.probs))
        .map(|(&m, (&log_score, &prob))| SubsetView {
            parents: lp.family.parents_of(m).into_iter().map(name).collect(),
            log_score,
            prob,
        })
        .collect();
    let arcs: Vec<ArcProbView> = lp
        .family
        .candidates()
        .iter()
        .enumerate()
        .map(|(j, &c)| ArcProbView {
            parent: name(c),
            p: lp.arc_probability(j),
        })
        .collect();
    serde_json::json!({
        "child": name(lp.family.child()),
        "candidates": lp.family.candidates().iter().map(|&c| name(c)).collect::<Vec<_>>(),
        "subsets": subsets,
        "prob_sum": lp.probs.iter().sum::<f64>(),
        "arc_probabilities": arcs,
    })
}

#[derive(Debug, Serialize)]
struct ArcDiagView<'a> {
    parent: &'a str,
    #[serde(rename = "P")]
    p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decision: Option<ArcDecision>,
}

#[derive(Debug, Serialize)]
struct ChildDiagView<'a> {
    child: &'a str,
    q: usize,
    lattice_size: usize,
    path: SelectionPath,
    arcs: Vec<ArcDiagView<'a>>,
    selected: Vec<&'a str>,
    local_bayes_risk: f64,
}

fn child_view<'a>(d: &LocalDiagnostics, dataset: &'a CategoricalDataset) -> ChildDiagView<'a> {
    let name = |i: usize| dataset.variable(i).name();
    ChildDiagView {
        child: name(d.child),
        q: d.q,
        lattice_size: d.lattice_size,
        path: d.path,
        arcs: d
            .arcs
            .iter()
            .map(|a| ArcDiagView {
                parent: name(a.parent),
                p: a.probability,
                delta: a.delta,
                decision: a.decision,
            })
            .collect(),
        selected: d.selected.iter().map(|&p| name(p)).collect(),
        local_bayes_risk: d.local_bayes_risk,
    }
}

pub fn diagnostics_json(diag: &LearnDiagnostics, dataset: &CategoricalDataset) -> Value {
    let children: Vec<ChildDiagView> = diag
        .children
        .iter()
        .map(|d| child_view(d, dataset))
        .collect();
    serde_json::json!({
        "children": children,
        "total_bayes_risk": diag.total_bayes_risk,
    })
}

pub fn score_json(dag: &DagModel, scores: &[f64], dataset: &CategoricalDataset) -> Value {
    let name = |i: usize| dataset.variable(i).name();
    let families: Vec<Value> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| {
            serde_json::json!({
                "child": name(i),
                "parents": dag.parents(i).iter().map(|&p| name(p)).collect::<Vec<_>>(),
                "log_score": s,
            })
        })
        .collect();
    serde_json::json!({
        "log_marginal_likelihood": scores.iter().sum::<f64>(),
        "families": families,
    })
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}
