//! Efron–Stein decomposition of constraint indicators and of whole
//! instances, with the moment data the certificate needs.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::chain::{power, Cell, CellIntegrator, ChainFunction, VarSet};
use crate::error::Result;
use crate::exact::{Polynomial, Rational, VarId};
use crate::instance::{Constraint, Instance, LocalPerm};

/// Parts of a single function keyed by subset, `∅` included when nonzero.
pub type PartMap = BTreeMap<VarSet, ChainFunction>;

/// Decomposes one constraint indicator via `f_S = Σ_{T⊆S} (-1)^{|S∖T|} E[f | x_T]`.
/// Only nonzero parts are returned, each with support exactly `S`.
pub fn decompose_constraint(c: &Constraint) -> PartMap {
    decompose_pattern(c.arity(), c.allowed())
        .iter()
        .map(|(s, f)| {
            let map = |i: VarId| c.vars()[i as usize];
            (VarSet::new(s.iter().map(map)), f.relabel(map))
        })
        .collect()
}

/// Decomposition of a constraint on local variables `0..d`.
fn decompose_pattern(d: usize, allowed: &[LocalPerm]) -> Vec<(VarSet, ChainFunction)> {
    let support = VarSet::new(0..d as VarId);
    let indicator = ChainFunction::from_pieces(
        support.clone(),
        allowed
            .iter()
            .map(|p| (Cell::new(p.iter().map(|&i| i as VarId)), Polynomial::one())),
    )
    .expect("allowed permutations cover the support");

    // E[f | x_T] for every T, each obtained from the superset T ∪ {min missing}.
    let mut conditional: HashMap<VarSet, ChainFunction> = HashMap::new();
    let mut subsets: Vec<VarSet> = support.subsets().collect();
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    for t in &subsets {
        let value = if t.len() == d {
            indicator.clone()
        } else {
            let missing = support.difference(t).iter().next().expect("t is a proper subset");
            let parent = t.union(&VarSet::new([missing]));
            conditional[&parent].conditional_expectation(t)
        };
        conditional.insert(t.clone(), value);
    }

    let mut parts = Vec::new();
    for s in subsets.iter().rev() {
        let mut part = ChainFunction::zero(s.clone());
        for t in s.subsets() {
            let sign = if (s.len() - t.len()) % 2 == 0 { Rational::one() } else { -Rational::one() };
            let term = conditional[&t].refine(s).scale(&sign);
            part.add_assign(&term).expect("refined to the same support");
        }
        if !part.is_zero() {
            parts.push((s.clone(), part));
        }
    }
    parts
}

/// Variables the objective actually depends on.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependencySet(Vec<VarId>);

impl DependencySet {
    pub fn new(vars: impl IntoIterator<Item = VarId>) -> Self {
        let mut v: Vec<VarId> = vars.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        DependencySet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn as_slice(&self) -> &[VarId] {
        &self.0
    }
}

/// Sparse Efron–Stein decomposition `Φ = mean + Σ_{S≠∅} Φ_S` of an
/// instance objective. Every stored part is nonzero and has positive
/// second moment.
pub struct EsDecomposition {
    arity: usize,
    mean: Rational,
    parts: BTreeMap<VarSet, ChainFunction>,
    m2: BTreeMap<VarSet, Rational>,
    m4: OnceLock<BTreeMap<VarSet, Rational>>,
}

impl std::fmt::Debug for EsDecomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EsDecomposition")
            .field("arity", &self.arity)
            .field("mean", &self.mean)
            .field("parts", &self.parts)
            .finish()
    }
}

/// Decomposes the objective of `inst`.
///
/// Each distinct allowed-set pattern is decomposed once; constraints reuse
/// it through variable renaming. Only subsets of constraint scopes are ever
/// touched, so the work is linear in the number of constraints.
pub fn decompose_instance(inst: &Instance) -> EsDecomposition {
    type Pattern = (usize, Vec<LocalPerm>);
    let mut keys: HashMap<Pattern, usize> = HashMap::new();
    let mut pattern_of = Vec::with_capacity(inst.constraints().len());
    for c in inst.constraints() {
        let next = keys.len();
        let id = *keys.entry((c.arity(), c.allowed().to_vec())).or_insert(next);
        pattern_of.push(id);
    }
    let mut distinct: Vec<(&Pattern, usize)> = keys.iter().map(|(k, &i)| (k, i)).collect();
    distinct.sort_by_key(|&(_, i)| i);
    let patterns: Vec<Vec<(VarSet, ChainFunction)>> = distinct
        .par_iter()
        .map(|((d, allowed), _)| decompose_pattern(*d, allowed))
        .collect();

    let (mean, merged) = inst
        .constraints()
        .par_iter()
        .zip(pattern_of.par_iter())
        .fold(
            || (Rational::zero(), HashMap::<VarSet, ChainFunction>::new()),
            |(mut mean, mut acc), (c, &pid)| {
                for (s, f) in &patterns[pid] {
                    if s.is_empty() {
                        mean += f.constant_value();
                        continue;
                    }
                    let map = |i: VarId| c.vars()[i as usize];
                    let global = f.relabel(map);
                    match acc.entry(global.support().clone()) {
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(global);
                        }
                        std::collections::hash_map::Entry::Occupied(mut e) => {
                            e.get_mut().add_assign(&global).expect("same support");
                        }
                    }
                }
                (mean, acc)
            },
        )
        .reduce(
            || (Rational::zero(), HashMap::new()),
            |(m1, mut a), (m2, b)| {
                let (small, large) = if a.len() < b.len() { (a, b) } else { (std::mem::take(&mut a), b) };
                let mut large = large;
                for (s, f) in small {
                    match large.entry(s) {
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(f);
                        }
                        std::collections::hash_map::Entry::Occupied(mut e) => {
                            e.get_mut().add_assign(&f).expect("same support");
                        }
                    }
                }
                (m1 + m2, large)
            },
        );

    let parts: BTreeMap<VarSet, ChainFunction> =
        merged.into_iter().filter(|(_, f)| !f.is_zero()).collect();
    let m2 = part_moments(&parts, 2);
    EsDecomposition {
        arity: inst.arity(),
        mean,
        parts,
        m2,
        m4: OnceLock::new(),
    }
}

/// `E[Φ_S^r]` for every part. Identical positional pieces (common after
/// pattern reuse) are integrated once.
fn part_moments(parts: &BTreeMap<VarSet, ChainFunction>, r: u32) -> BTreeMap<VarSet, Rational> {
    let mut index: HashMap<(usize, &Arc<Polynomial>), usize> = HashMap::new();
    let mut unique: Vec<(usize, &Arc<Polynomial>)> = Vec::new();
    let mut layout: Vec<Vec<usize>> = Vec::with_capacity(parts.len());
    for f in parts.values() {
        let ids = f
            .positional_pieces()
            .map(|(cell, p)| {
                *index.entry((cell.len(), p)).or_insert_with(|| {
                    unique.push((cell.len(), p));
                    unique.len() - 1
                })
            })
            .collect();
        layout.push(ids);
    }
    let values: Vec<Rational> = unique
        .par_iter()
        .map_init(CellIntegrator::default, |integ, &(d, p)| integ.integrate(&power(p, r), d))
        .collect();
    parts
        .keys()
        .zip(layout)
        .map(|(s, ids)| (s.clone(), ids.iter().map(|&i| &values[i]).sum()))
        .collect()
}

impl EsDecomposition {
    /// Arity of the instance the decomposition came from.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// `Φ_∅ = E[Φ]`.
    pub fn mean(&self) -> &Rational {
        &self.mean
    }

    /// Nonempty parts in graded subset order.
    pub fn parts(&self) -> impl Iterator<Item = (&VarSet, &ChainFunction)> {
        self.parts.iter()
    }

    pub fn part(&self, s: &VarSet) -> Option<&ChainFunction> {
        self.parts.get(s)
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    /// Largest `|S|` over nonzero parts (0 for a constant objective).
    pub fn degree(&self) -> usize {
        self.parts.keys().map(VarSet::len).max().unwrap_or(0)
    }

    /// `E[Φ_S^2]` for a stored part.
    pub fn second_moment(&self, s: &VarSet) -> Option<&Rational> {
        self.m2.get(s)
    }

    pub fn second_moments(&self) -> &BTreeMap<VarSet, Rational> {
        &self.m2
    }

    /// `E[Φ_S^4]` for all parts, computed on first use.
    pub fn fourth_moments(&self) -> &BTreeMap<VarSet, Rational> {
        self.m4.get_or_init(|| part_moments(&self.parts, 4))
    }

    /// `Var Φ = Σ_{S≠∅} E[Φ_S^2]`.
    pub fn variance(&self) -> Rational {
        self.m2.values().sum()
    }

    /// Smallest nonzero part variance; `None` for a constant objective.
    pub fn min_part_variance(&self) -> Option<&Rational> {
        self.m2.values().min()
    }

    pub fn dependency_set(&self) -> DependencySet {
        DependencySet::new(self.parts.keys().flat_map(|s| s.iter()))
    }

    /// `max_S E[Φ_S^4] / E[Φ_S^2]^2`, or 1 for a constant objective.
    pub fn local_fourth_moment_ratio(&self) -> Rational {
        let m4 = self.fourth_moments();
        self.m2
            .iter()
            .map(|(s, m2)| &m4[s] / (m2 * m2))
            .max()
            .unwrap_or_else(Rational::one)
    }

    /// `Σ_{S≠∅} Φ_S(point)`, i.e. `Φ(point) - mean`, at a tie-free point.
    pub fn centered_value(&self, point: impl Fn(VarId) -> Option<Rational> + Copy) -> Result<Rational> {
        let mut total = Rational::zero();
        for f in self.parts.values() {
            total += f.eval(point)?;
        }
        Ok(total)
    }

    /// `Σ_S Φ_S(point)` including the mean.
    pub fn value(&self, point: impl Fn(VarId) -> Option<Rational> + Copy) -> Result<Rational> {
        Ok(self.centered_value(point)? + &self.mean)
    }
}

/// `a/b` helper used by tests and reports.
pub(crate) fn ratio(a: usize, b: usize) -> Rational {
    Rational::new(BigInt::from(a), BigInt::from(b))
}
