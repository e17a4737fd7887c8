//! Loss tables over model lattices and the `⊕` sum that builds them from
//! per-arc pairwise losses.
//!
//! Rows are true states, columns are actions, and both follow the lattice
//! order of [`crate::modelspace::enumerate_lattice`] whenever the table is
//! attached to a set of arcs.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::CategoricalDataset;
use crate::error::{Error, Result};
use crate::modelspace::{
    enumerate_lattice, lattice_index, CandidateParents, SubsetMask, MAX_PARENT_CAP,
};

/// Largest number of arcs a table produced by [`loss_sum`] may span.
pub const MAX_SUM_ARCS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArcId {
    pub child: usize,
    pub parent: usize,
}

impl ArcId {
    pub fn new(parent: usize, child: usize) -> Self {
        Self { child, parent }
    }
}

/// The 0-L loss for one arc: `l0` is paid for adding the arc when the truth
/// lacks it, `l1` for omitting it when the truth has it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseLoss {
    pub l0: f64,
    pub l1: f64,
}

impl PairwiseLoss {
    pub fn new(l0: f64, l1: f64) -> Result<Self> {
        for (name, v) in [("l0", l0), ("l1", l1)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!(
                    "pairwise loss {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { l0, l1 })
    }

    pub fn symmetric(l: f64) -> Result<Self> {
        Self::new(l, l)
    }
}

/// A square state × action loss matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    dim: usize,
    entries: Vec<f64>,
    arcs: Option<Vec<ArcId>>,
}

impl LossTable {
    /// A general table; `rows[i][j]` is the loss of action `j` under state `i`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Dimension("loss table has no states".into()));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension(format!(
                    "loss table row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation(format!(
                        "loss entry ({i},{j}) = {v} is not a nonnegative finite number"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::validation(format!(
                        "loss entry ({i},{i}) = {v}; the diagonal must be zero"
                    )));
                }
            }
            entries.extend(row);
        }
        Ok(Self {
            dim,
            entries,
            arcs: None,
        })
    }

    /// The 1×1 zero table over no arcs; identity for [`loss_sum`].
    pub fn empty() -> Self {
        Self {
            dim: 1,
            entries: vec![0.0],
            arcs: Some(Vec::new()),
        }
    }

    pub fn pairwise(arc: ArcId, loss: PairwiseLoss) -> Self {
        Self {
            dim: 2,
            entries: vec![0.0, loss.l0, loss.l1, 0.0],
            arcs: Some(vec![arc]),
        }
    }

    /// Attaches a table of size `2^q` to `q` arcs, reading its states in
    /// lattice order.
    pub fn with_arcs(mut self, arcs: Vec<ArcId>) -> Result<Self> {
        if arcs.len() >= usize::BITS as usize || 1usize << arcs.len() != self.dim {
            return Err(Error::Dimension(format!(
                "a table of {} states cannot span {} arcs",
                self.dim,
                arcs.len()
            )));
        }
        check_distinct(&arcs)?;
        self.arcs = Some(arcs);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arcs(&self) -> Option<&[ArcId]> {
        self.arcs.as_deref()
    }

    /// Loss of `action` when the truth is `state`.
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.entries[state * self.dim + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.entries[state * self.dim..(state + 1) * self.dim]
    }

    pub fn column(&self, action: usize) -> Vec<f64> {
        (0..self.dim).map(|s| self.get(s, action)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|s| self.row(s).to_vec()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * factor).collect(),
            arcs: self.arcs.clone(),
        }
    }

    /// Same table with its arcs sorted and states permuted to match.
    pub fn canonical(&self) -> Self {
        let Some(arcs) = &self.arcs else {
            return self.clone();
        };
        let q = arcs.len();
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by_key(|&b| arcs[b]);
        let sorted: Vec<ArcId> = order.iter().map(|&b| arcs[b]).collect();
        // new bit i carries old bit order[i]
        let to_old = |m: SubsetMask| {
            (0..q)
                .filter(|&i| m >> i & 1 == 1)
                .fold(0, |acc, i| acc | 1 << order[i])
        };
        let masks = enumerate_lattice(q, MAX_PARENT_CAP).expect("existing table fits");
        let old_idx: Vec<usize> = masks.iter().map(|&m| lattice_index(q, to_old(m))).collect();
        let mut entries = Vec::with_capacity(self.entries.len());
        for &s in &old_idx {
            for &a in &old_idx {
                entries.push(self.get(s, a));
            }
        }
        Self {
            dim: self.dim,
            entries,
            arcs: Some(sorted),
        }
    }
}

fn check_distinct(arcs: &[ArcId]) -> Result<()> {
    for (i, a) in arcs.iter().enumerate() {
        if arcs[..i].contains(a) {
            return Err(Error::Algebra(format!(
                "arc {}->{} appears twice",
                a.parent, a.child
            )));
        }
    }
    Ok(())
}

/// The 0-1 loss over `g` models.
pub fn zero_one(g: usize) -> Result<LossTable> {
    if g == 0 {
        return Err(Error::Dimension("0-1 loss needs at least one model".into()));
    }
    let rows = (0..g)
        .map(|i| (0..g).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect();
    LossTable::from_rows(rows)
}

/// `a ⊕ b` over disjoint arc sets: states and actions combine by `⊎` and
/// entries add.
pub fn loss_sum(a: &LossTable, b: &LossTable) -> Result<LossTable> {
    let (Some(arcs_a), Some(arcs_b)) = (a.arcs(), b.arcs()) else {
        return Err(Error::Algebra(
            "⊕ needs tables attached to arc sets; general tables cannot be summed".into(),
        ));
    };
    if let Some(shared) = arcs_a.iter().find(|x| arcs_b.contains(x)) {
        return Err(Error::Algebra(format!(
            "overlapping arc sets: {}->{} appears in both operands",
            shared.parent, shared.child
        )));
    }
    let (qa, qb) = (arcs_a.len(), arcs_b.len());
    if qa + qb > MAX_SUM_ARCS {
        return Err(Error::Capacity {
            what: "arcs in a ⊕ sum".into(),
            cap: MAX_SUM_ARCS,
            got: qa + qb,
        });
    }
    let masks = enumerate_lattice(qa + qb, MAX_PARENT_CAP)?;
    let low = (1 << qa) - 1;
    let split: Vec<(usize, usize)> = masks
        .iter()
        .map(|&m| (lattice_index(qa, m & low), lattice_index(qb, m >> qa)))
        .collect();
    let mut entries = Vec::with_capacity(masks.len() * masks.len());
    for &(sa, sb) in &split {
        for &(ta, tb) in &split {
            entries.push(a.get(sa, ta) + b.get(sb, tb));
        }
    }
    Ok(LossTable {
        dim: masks.len(),
        entries,
        arcs: Some(arcs_a.iter().chain(arcs_b).copied().collect()),
    })
}

/// One child's locally disintegrable loss: a pairwise loss per candidate arc.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDisintegrableLoss {
    pub arcs: Vec<ArcId>,
    pub pairwise: Vec<PairwiseLoss>,
}

impl LocalDisintegrableLoss {
    pub fn new(arcs: Vec<ArcId>, pairwise: Vec<PairwiseLoss>) -> Result<Self> {
        if arcs.len() != pairwise.len() {
            return Err(Error::Dimension(format!(
                "{} arcs but {} pairwise losses",
                arcs.len(),
                pairwise.len()
            )));
        }
        check_distinct(&arcs)?;
        Ok(Self { arcs, pairwise })
    }

    /// Arcs `j -> 0` for `j = 1..=q`, for losses not tied to real variables.
    pub fn anonymous(pairwise: Vec<PairwiseLoss>) -> Self {
        let arcs = (0..pairwise.len()).map(|j| ArcId::new(j + 1, 0)).collect();
        Self { arcs, pairwise }
    }

    pub fn q(&self) -> usize {
        self.pairwise.len()
    }

    /// `Σ_{j ∈ T∖S} l0_j + Σ_{j ∈ S∖T} l1_j`.
    pub fn entry(&self, state: SubsetMask, action: SubsetMask) -> f64 {
        let added = action & !state;
        let omitted = state & !action;
        self.pairwise
            .iter()
            .enumerate()
            .map(|(j, pl)| {
                if added >> j & 1 == 1 {
                    pl.l0
                } else if omitted >> j & 1 == 1 {
                    pl.l1
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// The table built by iterating `⊕` over the generators.
    pub fn expand_iterated(&self) -> Result<LossTable> {
        self.arcs
            .iter()
            .zip(&self.pairwise)
            .try_fold(LossTable::empty(), |acc, (&arc, &pl)| {
                loss_sum(&acc, &LossTable::pairwise(arc, pl))
            })
    }
}

/// Expands a locally disintegrable loss into its `2^q × 2^q` table.
pub fn expand_local(d: &LocalDisintegrableLoss, cap: usize) -> Result<LossTable> {
    let masks = enumerate_lattice(d.q(), cap)?;
    let mut entries = Vec::with_capacity(masks.len() * masks.len());
    for &s in &masks {
        for &t in &masks {
            entries.push(d.entry(s, t));
        }
    }
    Ok(LossTable {
        dim: masks.len(),
        entries,
        arcs: Some(d.arcs.clone()),
    })
}

/// A first entry of a table that no disintegrable loss can produce.
#[derive(Debug, Clone, PartialEq)]
pub struct DisintegrabilityViolation {
    pub state: usize,
    pub action: usize,
    pub expected: f64,
    pub found: f64,
}

/// Reads the only pairwise losses a lattice table could have come from (row
/// of the null state and column of the null action) and checks that their
/// expansion reproduces every entry.
pub fn fit_pairwise(
    table: &LossTable,
) -> std::result::Result<LocalDisintegrableLoss, DisintegrabilityViolation> {
    let q = table.dim().trailing_zeros() as usize;
    let masks = enumerate_lattice(q, MAX_PARENT_CAP).expect("table fits the lattice cap");
    let pairwise: Vec<PairwiseLoss> = (0..q)
        .map(|j| {
            let g = lattice_index(q, 1 << j);
            PairwiseLoss {
                l0: table.get(0, g),
                l1: table.get(g, 0),
            }
        })
        .collect();
    let fitted = LocalDisintegrableLoss::anonymous(pairwise);
    for (s, &ms) in masks.iter().enumerate() {
        for (a, &ma) in masks.iter().enumerate() {
            let expected = fitted.entry(ms, ma);
            let found = table.get(s, a);
            if expected != found {
                return Err(DisintegrabilityViolation {
                    state: s,
                    action: a,
                    expected,
                    found,
                });
            }
        }
    }
    Ok(fitted)
}

/// The state-count loss: pure omissions cost `h` per missing arc; any other
/// error costs `k` per state of every variable in the arc difference.
///
/// `cardinalities[j]` is the number of states of candidate `j`.
pub fn state_count_loss(cardinalities: &[usize], h: f64, k: f64) -> Result<LossTable> {
    for (name, v) in [("h", h), ("k", k)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let q = cardinalities.len();
    let masks = enumerate_lattice(q, MAX_PARENT_CAP)?;
    let states = |m: SubsetMask| -> f64 {
        (0..q)
            .filter(|&j| m >> j & 1 == 1)
            .map(|j| cardinalities[j] as f64)
            .sum()
    };
    let rows = masks
        .iter()
        .map(|&s| {
            masks
                .iter()
                .map(|&t| {
                    if s == t {
                        0.0
                    } else if t & !s == 0 {
                        h * f64::from((s & !t).count_ones())
                    } else {
                        k * states(s ^ t)
                    }
                })
                .collect()
        })
        .collect();
    LossTable::from_rows(rows)?.with_arcs((0..q).map(|j| ArcId::new(j + 1, 0)).collect())
}

/// Over-complexity costs 1 whatever is added; any error under a true model
/// with `m` arcs costs `h·m`.
pub fn uniform_complexity_loss(q: usize, h: f64) -> Result<LossTable> {
    if q == 0 {
        return Err(Error::validation("uniform complexity loss needs q >= 1"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::validation(format!("h must be positive, got {h}")));
    }
    let masks = enumerate_lattice(q, MAX_PARENT_CAP)?;
    let rows = masks
        .iter()
        .map(|&s| {
            masks
                .iter()
                .map(|&t| match (s == t, s) {
                    (true, _) => 0.0,
                    (false, 0) => 1.0,
                    (false, s) => h * f64::from(s.count_ones()),
                })
                .collect()
        })
        .collect();
    LossTable::from_rows(rows)?.with_arcs((0..q).map(|j| ArcId::new(j + 1, 0)).collect())
}

/// Pairwise losses for every arc of a network: a default plus overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct DisintegrableLoss {
    pub default: PairwiseLoss,
    pub overrides: BTreeMap<ArcId, PairwiseLoss>,
}

impl DisintegrableLoss {
    pub fn uniform(default: PairwiseLoss) -> Self {
        Self {
            default,
            overrides: BTreeMap::new(),
        }
    }

    pub fn get(&self, arc: ArcId) -> PairwiseLoss {
        self.overrides.get(&arc).copied().unwrap_or(self.default)
    }

    pub fn for_family(&self, family: &CandidateParents) -> LocalDisintegrableLoss {
        let arcs: Vec<ArcId> = family
            .candidates()
            .iter()
            .map(|&p| ArcId::new(p, family.child()))
            .collect();
        let pairwise = arcs.iter().map(|&a| self.get(a)).collect();
        LocalDisintegrableLoss { arcs, pairwise }
    }
}

/// The loss a child's local decision is made under.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalLoss {
    Disintegrable(LocalDisintegrableLoss),
    Table(LossTable),
}

/// A network-wide loss, resolved against a dataset's variables.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkLoss {
    ZeroOne,
    Disintegrable(DisintegrableLoss),
    StateCount {
        h: f64,
        k: f64,
    },
    /// One general table shared by every child whose lattice has its size.
    Table(LossTable),
}

impl NetworkLoss {
    pub fn is_disintegrable(&self) -> bool {
        matches!(self, NetworkLoss::Disintegrable(_))
    }

    pub fn local(
        &self,
        family: &CandidateParents,
        dataset: &CategoricalDataset,
    ) -> Result<LocalLoss> {
        let q = family.q();
        let arcs = || -> Vec<ArcId> {
            family
                .candidates()
                .iter()
                .map(|&p| ArcId::new(p, family.child()))
                .collect()
        };
        match self {
            NetworkLoss::Disintegrable(d) => Ok(LocalLoss::Disintegrable(d.for_family(family))),
            NetworkLoss::ZeroOne => Ok(LocalLoss::Table(zero_one(1 << q)?.with_arcs(arcs())?)),
            NetworkLoss::StateCount { h, k } => {
                if q == 0 {
                    return Ok(LocalLoss::Table(LossTable::empty()));
                }
                let cards: Vec<usize> = family
                    .candidates()
                    .iter()
                    .map(|&p| dataset.cardinality(p))
                    .collect();
                Ok(LocalLoss::Table(
                    state_count_loss(&cards, *h, *k)?.with_arcs(arcs())?,
                ))
            }
            NetworkLoss::Table(t) => {
                if q == 0 {
                    return Ok(LocalLoss::Table(LossTable::empty()));
                }
                if t.dim() != 1 << q {
                    return Err(Error::Dimension(format!(
                        "loss table has {} states but `{}` has a lattice of {} subsets",
                        t.dim(),
                        dataset.variable(family.child()).name(),
                        1usize << q
                    )));
                }
                Ok(LocalLoss::Table(t.clone().with_arcs(arcs())?))
            }
        }
    }
}

/// JSON form of a pairwise loss in a loss spec file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub l0: f64,
    pub l1: f64,
}

/// The loss spec file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossSpec {
    ZeroOne,
    Disintegrable {
        default: PairSpec,
        #[serde(default)]
        arcs: IndexMap<String, PairSpec>,
    },
    StateCount {
        h: f64,
        k: f64,
    },
    Table {
        #[serde(default)]
        states: Vec<String>,
        entries: Vec<Vec<f64>>,
    },
}

impl LossSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self, dataset: &CategoricalDataset) -> Result<NetworkLoss> {
        match self {
            LossSpec::ZeroOne => Ok(NetworkLoss::ZeroOne),
            LossSpec::Disintegrable { default, arcs } => {
                let default = PairwiseLoss::new(default.l0, default.l1)?;
                let mut overrides = BTreeMap::new();
                for (key, pl) in arcs {
                    let (child, parent) = key.split_once(':').ok_or_else(|| {
                        Error::validation(format!(
                            "arc key `{key}` is not of the form child:parent"
                        ))
                    })?;
                    let lookup = |name: &str| {
                        dataset.index_of(name).ok_or_else(|| {
                            Error::validation(format!("arc key `{key}`: unknown variable `{name}`"))
                        })
                    };
                    let arc = ArcId::new(lookup(parent)?, lookup(child)?);
                    overrides.insert(arc, PairwiseLoss::new(pl.l0, pl.l1)?);
                }
                Ok(NetworkLoss::Disintegrable(DisintegrableLoss {
                    default,
                    overrides,
                }))
            }
            LossSpec::StateCount { h, k } => {
                for (name, v) in [("h", h), ("k", k)] {
                    if !(*v > 0.0 && v.is_finite()) {
                        return Err(Error::validation(format!("{name} must be positive")));
                    }
                }
                Ok(NetworkLoss::StateCount { h: *h, k: *k })
            }
            LossSpec::Table { states, entries } => {
                if !states.is_empty() && states.len() != entries.len() {
                    return Err(Error::Dimension(format!(
                        "{} state labels for {} table rows",
                        states.len(),
                        entries.len()
                    )));
                }
                let t = LossTable::from_rows(entries.clone())?;
                if !t.dim().is_power_of_two() {
                    return Err(Error::Dimension(format!(
                        "a lattice table needs 2^q states, got {}",
                        t.dim()
                    )));
                }
                Ok(NetworkLoss::Table(t))
            }
        }
    }
}
