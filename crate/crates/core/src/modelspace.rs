//! Orderings, candidate parent sets, local models on the subset lattice, and
//! whole DAGs assembled from them.
//!
//! A local model is a subset of a child's candidate list, stored as a bitmask
//! where bit `j` stands for candidate position `j` (0-based). Lattices are
//! always enumerated level by level and, within a level, by ascending mask
//! value; scoring, loss tables and oracles index by that order.

use std::fmt;

use crate::error::{Error, Result};

pub const DEFAULT_PARENT_CAP: usize = 12;
/// Hard ceiling on any configured cap; a lattice of 2^24 subsets is already
/// far beyond what the exact local search is meant for.
pub const MAX_PARENT_CAP: usize = 24;

pub type SubsetMask = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableOrdering {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl VariableOrdering {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (pos, &v) in order.iter().enumerate() {
            if v >= n || position[v] != usize::MAX {
                return Err(Error::Ordering(format!(
                    "{order:?} is not a permutation of 0..{n}"
                )));
            }
            position[v] = pos;
        }
        Ok(Self { order, position })
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect()).expect("identity is a permutation")
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    /// True when `a` comes before `b`, i.e. `a` is an eligible parent of `b`.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.position[a] < self.position[b]
    }

    pub fn predecessors(&self, child: usize) -> &[usize] {
        &self.order[..self.position[child]]
    }
}

/// The ordered list of eligible parents for one child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateParents {
    child: usize,
    candidates: Vec<usize>,
}

impl CandidateParents {
    pub fn new(
        child: usize,
        candidates: Vec<usize>,
        ordering: &VariableOrdering,
        cap: usize,
    ) -> Result<Self> {
        if child >= ordering.len() {
            return Err(Error::InvalidFamily(format!(
                "child index {child} out of range"
            )));
        }
        for (m, &c) in candidates.iter().enumerate() {
            if c == child {
                return Err(Error::InvalidFamily(format!(
                    "variable {child} cannot be its own candidate parent"
                )));
            }
            if c >= ordering.len() {
                return Err(Error::InvalidFamily(format!(
                    "candidate index {c} out of range"
                )));
            }
            if candidates[..m].contains(&c) {
                return Err(Error::InvalidFamily(format!("candidate {c} listed twice")));
            }
            if !ordering.precedes(c, child) {
                return Err(Error::Ordering(format!(
                    "candidate {c} does not precede child {child}"
                )));
            }
        }
        check_cap(candidates.len(), cap, child)?;
        Ok(Self { child, candidates })
    }

    /// All predecessors of `child` in the ordering.
    pub fn from_ordering(child: usize, ordering: &VariableOrdering, cap: usize) -> Result<Self> {
        Self::new(child, ordering.predecessors(child).to_vec(), ordering, cap)
    }

    /// Builds a family without ordering checks; used by tests and oracles
    /// that construct lattices directly.
    pub fn unchecked(child: usize, candidates: Vec<usize>) -> Self {
        Self { child, candidates }
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn q(&self) -> usize {
        self.candidates.len()
    }

    /// Parent list for a subset mask, in candidate order.
    pub fn parents_of(&self, mask: SubsetMask) -> Vec<usize> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(j, _)| mask >> j & 1 == 1)
            .map(|(_, &p)| p)
            .collect()
    }
}

fn check_cap(q: usize, cap: usize, child: usize) -> Result<()> {
    let cap = cap.min(MAX_PARENT_CAP);
    if q > cap {
        return Err(Error::Capacity {
            what: format!("candidate parents of variable {child}"),
            cap,
            got: q,
        });
    }
    Ok(())
}

/// A parent subset for one child: a point of that child's lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalModel {
    family: CandidateParents,
    mask: SubsetMask,
}

impl LocalModel {
    pub fn new(family: CandidateParents, mask: SubsetMask) -> Result<Self> {
        if family.q() < 64 && mask >> family.q() != 0 {
            return Err(Error::Algebra(format!(
                "mask {mask:#b} has bits beyond the {} candidates",
                family.q()
            )));
        }
        Ok(Self { family, mask })
    }

    /// The null model: no arcs into the child.
    pub fn null(family: CandidateParents) -> Self {
        Self { family, mask: 0 }
    }

    /// The single-arc model for candidate position `j`.
    pub fn generator(family: CandidateParents, j: usize) -> Result<Self> {
        if j >= family.q() {
            return Err(Error::Algebra(format!(
                "generator {j} out of range for {} candidates",
                family.q()
            )));
        }
        Ok(Self {
            family,
            mask: 1 << j,
        })
    }

    pub fn child(&self) -> usize {
        self.family.child()
    }

    pub fn family(&self) -> &CandidateParents {
        &self.family
    }

    pub fn mask(&self) -> SubsetMask {
        self.mask
    }

    pub fn level(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(&self, j: usize) -> bool {
        self.mask >> j & 1 == 1
    }

    pub fn parents(&self) -> Vec<usize> {
        self.family.parents_of(self.mask)
    }
}

/// `a ⊎ b`: the model carrying every arc of either operand.
pub fn model_sum(a: &LocalModel, b: &LocalModel) -> Result<LocalModel> {
    if a.family != b.family {
        return Err(Error::Algebra(format!(
            "cannot sum local models of different families (child {} {:?} vs child {} {:?})",
            a.child(),
            a.family.candidates(),
            b.child(),
            b.family.candidates()
        )));
    }
    Ok(LocalModel {
        family: a.family.clone(),
        mask: a.mask | b.mask,
    })
}

/// A DAG given by one parent list per variable.
///
/// Equality compares parent *sets*; the stored list order is kept because
/// conditional probability tables are laid out over it.
#[derive(Debug, Clone, Eq)]
pub struct DagModel {
    parents: Vec<Vec<usize>>,
}

impl PartialEq for DagModel {
    fn eq(&self, other: &Self) -> bool {
        self.parents.len() == other.parents.len()
            && self.parents.iter().zip(&other.parents).all(|(a, b)| {
                let mut a = a.clone();
                let mut b = b.clone();
                a.sort_unstable();
                b.sort_unstable();
                a == b
            })
    }
}

impl DagModel {
    pub fn empty(n: usize) -> Self {
        Self {
            parents: vec![Vec::new(); n],
        }
    }

    /// Validates indices, self-loops, duplicates and acyclicity.
    pub fn from_parents(parents: Vec<Vec<usize>>) -> Result<Self> {
        let n = parents.len();
        for (child, ps) in parents.iter().enumerate() {
            for (m, &p) in ps.iter().enumerate() {
                if p >= n {
                    return Err(Error::validation(format!(
                        "parent index {p} of variable {child} out of range"
                    )));
                }
                if p == child {
                    return Err(Error::validation(format!("self-loop on variable {child}")));
                }
                if ps[..m].contains(&p) {
                    return Err(Error::validation(format!(
                        "parent {p} of variable {child} listed twice"
                    )));
                }
            }
        }
        let dag = Self { parents };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn num_variables(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, child: usize) -> &[usize] {
        &self.parents[child]
    }

    pub fn parent_lists(&self) -> &[Vec<usize>] {
        &self.parents
    }

    /// `(parent, child)` pairs, grouped by child.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect()
    }

    pub fn num_arcs(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn has_arc(&self, parent: usize, child: usize) -> bool {
        self.parents[child].contains(&parent)
    }

    pub fn is_subgraph_of(&self, other: &DagModel) -> bool {
        self.num_variables() == other.num_variables()
            && self.arcs().iter().all(|&(p, c)| other.has_arc(p, c))
    }

    /// Kahn's algorithm; ties broken by lowest variable index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.parents.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::validation("graph contains a directed cycle"));
        }
        Ok(order)
    }

    pub fn is_consistent_with(&self, ordering: &VariableOrdering) -> bool {
        self.arcs().iter().all(|&(p, c)| ordering.precedes(p, c))
    }
}

impl fmt::Display for DagModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arcs: Vec<String> = self
            .arcs()
            .iter()
            .map(|(p, c)| format!("{p}->{c}"))
            .collect();
        write!(f, "[{}]", arcs.join(", "))
    }
}

/// `⊎` over children: one local model per variable, assembled into a DAG.
pub fn global_sum(locals: &[LocalModel], ordering: &VariableOrdering) -> Result<DagModel> {
    let n = ordering.len();
    if locals.len() != n {
        return Err(Error::Algebra(format!(
            "expected {n} local models, got {}",
            locals.len()
        )));
    }
    let mut parents = vec![None; n];
    for local in locals {
        let child = local.child();
        if child >= n {
            return Err(Error::Algebra(format!("child index {child} out of range")));
        }
        if parents[child].is_some() {
            return Err(Error::Algebra(format!(
                "two local models for variable {child}"
            )));
        }
        let ps = local.parents();
        if let Some(&bad) = ps.iter().find(|&&p| !ordering.precedes(p, child)) {
            return Err(Error::Ordering(format!(
                "parent {bad} does not precede child {child}"
            )));
        }
        parents[child] = Some(ps);
    }
    Ok(DagModel {
        parents: parents.into_iter().map(Option::unwrap).collect(),
    })
}

/// Splits a DAG into local models over the given families.
pub fn decompose(dag: &DagModel, families: &[CandidateParents]) -> Result<Vec<LocalModel>> {
    families
        .iter()
        .map(|fam| {
            let mut mask = 0;
            for &p in dag.parents(fam.child()) {
                let j = fam
                    .candidates()
                    .iter()
                    .position(|&c| c == p)
                    .ok_or_else(|| {
                        Error::Algebra(format!(
                            "parent {p} of {} is not among its candidates",
                            fam.child()
                        ))
                    })?;
                mask |= 1 << j;
            }
            LocalModel::new(fam.clone(), mask)
        })
        .collect()
}

/// All `2^q` subsets, by level and then by ascending mask value.
pub fn enumerate_lattice(q: usize, cap: usize) -> Result<Vec<SubsetMask>> {
    let cap = cap.min(MAX_PARENT_CAP);
    if q > cap {
        return Err(Error::Capacity {
            what: "lattice width".into(),
            cap,
            got: q,
        });
    }
    let mut out = Vec::with_capacity(1 << q);
    out.push(0);
    let full: SubsetMask = (1 << q) - 1;
    for level in 1..=q {
        // Gosper's hack walks same-popcount masks in increasing order.
        let mut m: SubsetMask = (1 << level) - 1;
        while m <= full {
            out.push(m);
            let c = m & m.wrapping_neg();
            let r = m + c;
            m = (((r ^ m) >> 2) / c) | r;
        }
    }
    Ok(out)
}

/// Position of `mask` in [`enumerate_lattice`] order.
pub fn lattice_index(q: usize, mask: SubsetMask) -> usize {
    let level = mask.count_ones() as usize;
    let below: usize = (0..level).map(|l| binomial(q, l)).sum();
    // colex rank among subsets of the same size
    let mut rank = 0;
    let mut seen = 0;
    for bit in 0..q {
        if mask >> bit & 1 == 1 {
            seen += 1;
            rank += binomial(bit, seen);
        }
    }
    below + rank
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fam(q: usize) -> CandidateParents {
        CandidateParents::unchecked(q, (0..q).collect())
    }

    #[test]
    fn lattice_small_cases() {
        assert_eq!(enumerate_lattice(0, 12).unwrap(), vec![0]);
        assert_eq!(
            enumerate_lattice(2, 12).unwrap(),
            vec![0b00, 0b01, 0b10, 0b11]
        );
        assert!(matches!(
            enumerate_lattice(13, 12),
            Err(Error::Capacity {
                cap: 12,
                got: 13,
                ..
            })
        ));
    }

    #[test]
    fn lattice_q6_levels_match_brute_force() {
        let lat = enumerate_lattice(6, 12).unwrap();
        assert_eq!(lat.len(), 64);
        let mut sizes = [0usize; 7];
        for w in lat.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(a.count_ones() < b.count_ones() || (a.count_ones() == b.count_ones() && a < b));
        }
        for m in &lat {
            sizes[m.count_ones() as usize] += 1;
        }
        // brute-force count of masks in 0..64 by popcount
        let mut expected = [0usize; 7];
        for m in 0u32..64 {
            expected[m.count_ones() as usize] += 1;
        }
        assert_eq!(sizes, expected);
        assert_eq!(sizes, [1, 6, 15, 20, 15, 6, 1]);
    }

    #[test]
    fn lattice_index_inverts_enumeration() {
        for q in 0..=8 {
            for (i, &m) in enumerate_lattice(q, 12).unwrap().iter().enumerate() {
                assert_eq!(lattice_index(q, m), i);
            }
        }
    }

    #[test]
    fn figure2_sum() {
        // candidates [X3, X2] of X1
        let f = CandidateParents::unchecked(0, vec![2, 1]);
        let m3 = LocalModel::generator(f.clone(), 0).unwrap();
        let m2 = LocalModel::generator(f.clone(), 1).unwrap();
        let m23 = model_sum(&m2, &m3).unwrap();
        assert_eq!(m23.mask(), 0b11);
        assert_eq!(m23.parents(), vec![2, 1]);
        let m0 = LocalModel::null(f);
        assert_eq!(model_sum(&m23, &m0).unwrap(), m23);
    }

    #[test]
    fn sum_rejects_other_family() {
        let a = LocalModel::null(fam(2));
        let b = LocalModel::null(CandidateParents::unchecked(5, vec![0, 1]));
        assert!(matches!(model_sum(&a, &b), Err(Error::Algebra(_))));
    }

    #[test]
    fn global_sum_examples() {
        let ord = VariableOrdering::identity(3);
        let fams: Vec<_> = (0..3)
            .map(|c| CandidateParents::from_ordering(c, &ord, 12).unwrap())
            .collect();
        let nulls: Vec<_> = fams.iter().cloned().map(LocalModel::null).collect();
        let dag = global_sum(&nulls, &ord).unwrap();
        assert_eq!(dag, DagModel::empty(3));

        let locals = vec![
            LocalModel::null(fams[0].clone()),
            LocalModel::new(fams[1].clone(), 0b1).unwrap(),
            LocalModel::new(fams[2].clone(), 0b11).unwrap(),
        ];
        let dag = global_sum(&locals, &ord).unwrap();
        assert_eq!(dag.num_arcs(), 3);
        assert!(dag.has_arc(0, 1) && dag.has_arc(0, 2) && dag.has_arc(1, 2));
    }

    #[test]
    fn global_sum_rejects_non_preceding_parent() {
        let ord = VariableOrdering::new(vec![1, 0]).unwrap();
        let bad = LocalModel::new(CandidateParents::unchecked(0, vec![1]), 1).unwrap();
        let other = LocalModel::new(CandidateParents::unchecked(1, vec![0]), 1).unwrap();
        assert!(global_sum(&[bad.clone(), LocalModel::null(fam(0))], &ord).is_err());
        // 0 -> 1 violates the ordering [1, 0]
        let res = global_sum(
            &[
                LocalModel::null(CandidateParents::unchecked(0, vec![])),
                other,
            ],
            &ord,
        );
        assert!(matches!(res, Err(Error::Ordering(_))));
        let _ = bad;
    }

    #[test]
    fn candidates_checked_against_ordering_and_cap() {
        let ord = VariableOrdering::new(vec![2, 0, 1]).unwrap();
        assert_eq!(ord.predecessors(1), &[2, 0]);
        assert!(CandidateParents::new(0, vec![1], &ord, 12).is_err());
        assert!(CandidateParents::new(1, vec![2, 0], &ord, 1).is_err());
        assert!(CandidateParents::new(1, vec![2, 0], &ord, 2).is_ok());
    }

    #[test]
    fn cycles_rejected() {
        assert!(DagModel::from_parents(vec![vec![1], vec![0]]).is_err());
        assert!(DagModel::from_parents(vec![vec![0]]).is_err());
        assert!(DagModel::from_parents(vec![vec![], vec![0], vec![1, 0]]).is_ok());
    }

    proptest! {
        #[test]
        fn local_sum_is_commutative_idempotent_monoid(a in 0u64..64, b in 0u64..64, c in 0u64..64) {
            let f = fam(6);
            let m = |x| LocalModel::new(f.clone(), x).unwrap();
            let (a, b, c) = (m(a), m(b), m(c));
            prop_assert_eq!(model_sum(&a, &b).unwrap(), model_sum(&b, &a).unwrap());
            prop_assert_eq!(
                model_sum(&model_sum(&a, &b).unwrap(), &c).unwrap(),
                model_sum(&a, &model_sum(&b, &c).unwrap()).unwrap()
            );
            prop_assert_eq!(model_sum(&a, &a).unwrap(), a.clone());
            prop_assert_eq!(model_sum(&a, &LocalModel::null(f.clone())).unwrap(), a);
        }

        #[test]
        fn decompose_inverts_global_sum(masks in proptest::collection::vec(0u64..1024, 5)) {
            let ord = VariableOrdering::new(vec![3, 1, 4, 0, 2]).unwrap();
            let fams: Vec<_> = (0..5)
                .map(|c| CandidateParents::from_ordering(c, &ord, 12).unwrap())
                .collect();
            let locals: Vec<_> = fams
                .iter()
                .zip(&masks)
                .map(|(f, &m)| LocalModel::new(f.clone(), m & ((1 << f.q()) - 1)).unwrap())
                .collect();
            let dag = global_sum(&locals, &ord).unwrap();
            prop_assert!(dag.topological_order().is_ok());
            prop_assert!(dag.is_consistent_with(&ord));
            prop_assert_eq!(decompose(&dag, &fams).unwrap(), locals);
        }
    }
}
