//! Brute-force exact oracles, independent of the decomposition code.
//!
//! Moments come from linear-extension counts: for iid uniform coordinates
//! the induced order is uniform, so `E[∏ φ_τ]` is the number of linear
//! extensions of the union of the chains `τ` divided by `|U|!`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{factorial, pow, Rational, VarId};
use crate::instance::Instance;
use crate::perm::next_permutation;

/// Largest poset handled by [`count_linear_extensions`].
pub const MAX_POSET_ELEMENTS: usize = 32;

/// Default cap on `n` for [`brute_force_opt`].
pub const DEFAULT_OPT_CAP: usize = 8;

/// Default bound on `(#basic predicates)^r` for [`exact_central_moment`].
pub const DEFAULT_MOMENT_BUDGET: u128 = 100_000_000;

/// A strict partial order on a set of variables, stored as its transitive
/// closure. Relations may contain cycles; [`Poset::is_acyclic`] reports it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poset {
    elements: Vec<VarId>,
    /// `above[i]` has bit `j` set when `elements[i] < elements[j]`.
    above: Vec<u32>,
    acyclic: bool,
}

impl Poset {
    /// Builds the closure of `relations`, each `(a, b)` meaning `a < b`.
    /// Elements mentioned only in `elements` stay incomparable.
    pub fn new(
        elements: impl IntoIterator<Item = VarId>,
        relations: impl IntoIterator<Item = (VarId, VarId)>,
    ) -> Result<Self> {
        let relations: Vec<(VarId, VarId)> = relations.into_iter().collect();
        let mut elems: Vec<VarId> = elements
            .into_iter()
            .chain(relations.iter().flat_map(|&(a, b)| [a, b]))
            .collect();
        elems.sort_unstable();
        elems.dedup();
        if elems.len() > MAX_POSET_ELEMENTS {
            return Err(Error::CapExceeded {
                what: "poset elements",
                size: elems.len(),
                cap: MAX_POSET_ELEMENTS,
            });
        }
        let idx = |v: VarId| elems.binary_search(&v).expect("collected above");
        let mut above = vec![0u32; elems.len()];
        for &(a, b) in &relations {
            above[idx(a)] |= 1 << idx(b);
        }
        // Warshall on bit rows.
        for k in 0..elems.len() {
            for i in 0..elems.len() {
                if above[i] >> k & 1 == 1 {
                    above[i] |= above[k];
                }
            }
        }
        let acyclic = (0..elems.len()).all(|i| above[i] >> i & 1 == 0);
        Ok(Poset { elements: elems, above, acyclic })
    }

    /// The poset generated by chains `τ_1, τ_2, …`, each listed from
    /// smallest to largest.
    pub fn from_chains<'a>(chains: impl IntoIterator<Item = &'a [VarId]>) -> Result<Self> {
        let chains: Vec<&[VarId]> = chains.into_iter().collect();
        Poset::new(
            chains.iter().flat_map(|c| c.iter().copied()),
            chains.iter().flat_map(|c| c.windows(2).map(|w| (w[0], w[1]))),
        )
    }

    pub fn elements(&self) -> &[VarId] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_acyclic(&self) -> bool {
        self.acyclic
    }

    /// Whether `a < b` holds in the closure.
    pub fn less(&self, a: VarId, b: VarId) -> bool {
        match (self.elements.binary_search(&a), self.elements.binary_search(&b)) {
            (Ok(i), Ok(j)) => self.above[i] >> j & 1 == 1,
            _ => false,
        }
    }

    /// Closure rows with elements renamed to `0..len`; equal keys mean
    /// isomorphic posets.
    fn shape(&self) -> Vec<u32> {
        self.above.clone()
    }
}

/// Number of linear extensions, by dynamic programming over down-sets.
pub fn count_linear_extensions(p: &Poset) -> Result<BigInt> {
    if !p.acyclic {
        return Err(Error::CyclicPoset);
    }
    let n = p.len();
    let mut below = vec![0u32; n];
    for (i, &row) in p.above.iter().enumerate() {
        for (j, b) in below.iter_mut().enumerate() {
            if row >> j & 1 == 1 {
                *b |= 1 << i;
            }
        }
    }
    // Layer by layer: every down-set of size s, with the number of ways to
    // list it. 32! < 2^128, so u128 is exact.
    let mut layer: HashMap<u32, u128> = HashMap::from([(0, 1)]);
    for _ in 0..n {
        let mut next: HashMap<u32, u128> = HashMap::with_capacity(layer.len() * 2);
        for (&set, &ways) in &layer {
            for (e, &req) in below.iter().enumerate() {
                if set >> e & 1 == 0 && req & !set == 0 {
                    *next.entry(set | 1 << e).or_insert(0) += ways;
                }
            }
        }
        layer = next;
    }
    Ok(BigInt::from(layer.into_values().sum::<u128>()))
}

/// `E[∏ φ_τ]` under a uniformly random ordering; zero when the chains are
/// contradictory.
pub fn product_expectation(predicates: &[&[VarId]]) -> Result<Rational> {
    let p = Poset::from_chains(predicates.iter().copied())?;
    expectation_of(&p)
}

fn expectation_of(p: &Poset) -> Result<Rational> {
    if !p.is_acyclic() {
        return Ok(Rational::zero());
    }
    Ok(Rational::new(count_linear_extensions(p)?, factorial(p.len() as u32)))
}

/// `E[(Φ - AVG)^r]` for `r` in `1..=4`, by expanding `Φ` into basic
/// predicates and summing over predicate multisets.
///
/// Constraints allowing every ordering are constant and are folded into
/// the mean. `budget` bounds `(#predicates)^r`.
pub fn exact_central_moment(inst: &Instance, r: u32, budget: u128) -> Result<Rational> {
    if !(1..=4).contains(&r) {
        return Err(Error::InvalidParameter(format!("moment order {r} not in 1..=4")));
    }
    let mut weights: HashMap<Vec<VarId>, u64> = HashMap::new();
    let mut constant = Rational::zero();
    for c in inst.constraints() {
        if c.is_full() {
            constant += Rational::one();
            continue;
        }
        for o in c.orderings() {
            *weights.entry(o).or_insert(0) += 1;
        }
    }
    let total: u64 = weights.values().sum();
    let needed = (total as u128).pow(r);
    if needed > budget {
        return Err(Error::BudgetExceeded { what: "predicate tuples", needed, budget });
    }
    let mut preds: Vec<(Vec<VarId>, u64)> = weights.into_iter().collect();
    preds.sort();
    let centre = inst.average_value() - constant;

    let mut cache: HashMap<Vec<u32>, Rational> = HashMap::new();
    // raw[j] = E[Φ'^j] for the non-constant part Φ'.
    let mut raw = vec![Rational::one()];
    for j in 1..=r {
        raw.push(raw_moment(&preds, j, &mut cache)?);
    }
    let mut out = Rational::zero();
    for j in 0..=r {
        let binom = Rational::from_integer(BigInt::from(binomial(r, j)));
        out += binom * &raw[j as usize] * pow(&-centre.clone(), r - j);
    }
    Ok(out)
}

/// `Σ` over nondecreasing index tuples of length `j`, each weighted by the
/// number of ordered tuples it represents.
fn raw_moment(
    preds: &[(Vec<VarId>, u64)],
    j: u32,
    cache: &mut HashMap<Vec<u32>, Rational>,
) -> Result<Rational> {
    let mut acc = Rational::zero();
    let mut idx = vec![0usize; j as usize];
    if preds.is_empty() {
        return Ok(acc);
    }
    loop {
        let chains: Vec<&[VarId]> = idx.iter().map(|&i| preds[i].0.as_slice()).collect();
        let poset = Poset::from_chains(chains)?;
        let e = match cache.get(&poset.shape()) {
            Some(e) => e.clone(),
            None => {
                let e = expectation_of(&poset)?;
                cache.insert(poset.shape(), e.clone());
                e
            }
        };
        if !e.is_zero() {
            let mut w: u128 = multinomial(&idx);
            for &i in &idx {
                w *= preds[i].1 as u128;
            }
            acc += e * Rational::from_integer(BigInt::from(w));
        }
        // Advance to the next nondecreasing tuple.
        let mut p = idx.len();
        loop {
            if p == 0 {
                return Ok(acc);
            }
            p -= 1;
            if idx[p] + 1 < preds.len() {
                let v = idx[p] + 1;
                for q in &mut idx[p..] {
                    *q = v;
                }
                break;
            }
        }
    }
}

/// Number of distinct orderings of a sorted tuple.
fn multinomial(sorted: &[usize]) -> u128 {
    let mut out = (1..=sorted.len() as u128).product::<u128>();
    let mut run = 1u128;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            out /= run;
        } else {
            run = 1;
        }
    }
    out
}

fn binomial(n: u32, k: u32) -> u64 {
    (0..k as u64).fold(1, |acc, i| acc * (n as u64 - i) / (i + 1))
}

/// Exact `OPT` and `AVG` by enumerating all `n!` orderings.
pub fn brute_force_opt(inst: &Instance, cap: usize) -> Result<(usize, Rational)> {
    let n = inst.num_vars();
    if n > cap {
        return Err(Error::CapExceeded { what: "variables", size: n, cap });
    }
    let mut perm: Vec<VarId> = (0..n as VarId).collect();
    let mut pos = vec![0usize; n];
    let mut best = 0;
    let mut total: u64 = 0;
    let mut count: u64 = 0;
    loop {
        for (r, &v) in perm.iter().enumerate() {
            pos[v as usize] = r;
        }
        let val = inst.evaluate_positions(&pos);
        best = best.max(val);
        total += val as u64;
        count += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok((best, Rational::new(BigInt::from(total), BigInt::from(count))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::instance::{generate, parse_instance, Constraint, GenParams, Model};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn count(elements: &[VarId], rel: &[(VarId, VarId)]) -> BigInt {
        count_linear_extensions(&Poset::new(elements.iter().copied(), rel.iter().copied()).unwrap())
            .unwrap()
    }

    #[test]
    fn linear_extension_examples() {
        assert_eq!(count(&[], &[(1, 2), (2, 3)]), BigInt::from(1));
        assert_eq!(count(&[1, 2, 3], &[]), BigInt::from(6));
        assert_eq!(count(&[], &[(1, 2), (1, 3)]), BigInt::from(2));
        assert_eq!(count(&[], &[]), BigInt::from(1));
    }

    #[test]
    fn cyclic_posets_are_rejected() {
        let p = Poset::new([], [(1, 2), (2, 3), (3, 1)]).unwrap();
        assert!(!p.is_acyclic());
        assert!(p.less(1, 1));
        assert_eq!(count_linear_extensions(&p), Err(Error::CyclicPoset));
    }

    #[test]
    fn product_expectation_examples() {
        assert_eq!(product_expectation(&[&[1, 2], &[2, 3]]).unwrap(), rat(1, 6));
        assert_eq!(product_expectation(&[&[1, 2], &[1, 3]]).unwrap(), rat(1, 3));
        assert_eq!(product_expectation(&[&[1, 2], &[2, 1]]).unwrap(), rat(0, 1));
    }

    #[test]
    fn product_expectation_matches_sampling() {
        let preds: [&[VarId]; 3] = [&[0, 2, 4], &[1, 2], &[3, 4, 5]];
        let exact = product_expectation(&preds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut perm: Vec<VarId> = (0..6).collect();
        let trials = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..trials {
            perm.shuffle(&mut rng);
            let mut pos = [0usize; 6];
            for (r, &v) in perm.iter().enumerate() {
                pos[v as usize] = r;
            }
            if preds.iter().all(|c| c.windows(2).all(|w| pos[w[0] as usize] < pos[w[1] as usize])) {
                hits += 1;
            }
        }
        let p: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = hits as f64 / trials as f64;
        assert!((freq - p).abs() <= 4.0 * se, "freq {freq} vs {p}");
    }

    #[test]
    fn moment_examples() {
        let one = Instance::new(2, vec![Constraint::mas(0, 1).unwrap()]).unwrap();
        assert_eq!(exact_central_moment(&one, 2, DEFAULT_MOMENT_BUDGET).unwrap(), rat(1, 4));
        assert_eq!(exact_central_moment(&one, 4, DEFAULT_MOMENT_BUDGET).unwrap(), rat(1, 16));
        let opposite = Instance::new(
            2,
            vec![Constraint::mas(0, 1).unwrap(), Constraint::mas(1, 0).unwrap()],
        )
        .unwrap();
        assert_eq!(exact_central_moment(&opposite, 2, DEFAULT_MOMENT_BUDGET).unwrap(), rat(0, 1));
    }

    #[test]
    fn moment_budget_is_enforced() {
        let tri = parse_instance(b"ocsp 1\nnvars 3\ncon 1 2\ncon 2 3\ncon 3 1\n").unwrap();
        assert!(matches!(
            exact_central_moment(&tri, 4, 80),
            Err(Error::BudgetExceeded { needed: 81, .. })
        ));
    }

    #[test]
    fn brute_force_examples() {
        let tri = parse_instance(b"ocsp 1\nnvars 3\ncon 1 2\ncon 2 3\ncon 3 1\n").unwrap();
        assert_eq!(brute_force_opt(&tri, DEFAULT_OPT_CAP).unwrap(), (2, rat(3, 2)));
        let bt = Instance::new(3, vec![Constraint::betweenness(0, 1, 2).unwrap()]).unwrap();
        assert_eq!(brute_force_opt(&bt, DEFAULT_OPT_CAP).unwrap(), (1, rat(1, 3)));
        let empty = Instance::new(0, vec![]).unwrap();
        assert_eq!(brute_force_opt(&empty, DEFAULT_OPT_CAP).unwrap(), (0, rat(0, 1)));
        let big = Instance::new(9, vec![]).unwrap();
        assert!(matches!(brute_force_opt(&big, 8), Err(Error::CapExceeded { .. })));
    }

    /// Moments from the full ordering table, as a second route.
    fn enumerated_moment(inst: &Instance, r: u32) -> Rational {
        let (_, avg) = brute_force_opt(inst, 8).unwrap();
        let n = inst.num_vars();
        let mut perm: Vec<VarId> = (0..n as VarId).collect();
        let mut pos = vec![0usize; n];
        let mut sum = Rational::zero();
        let mut count = 0u64;
        loop {
            for (i, &v) in perm.iter().enumerate() {
                pos[v as usize] = i;
            }
            let dev = Rational::from_integer(BigInt::from(inst.evaluate_positions(&pos))) - &avg;
            sum += pow(&dev, r);
            count += 1;
            if !next_permutation(&mut perm) {
                break;
            }
        }
        sum / Rational::from_integer(BigInt::from(count))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn single_predicate_expectation_is_inverse_factorial(d in 1usize..7, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut vars: Vec<VarId> = (0..10).collect();
            vars.shuffle(&mut rng);
            vars.truncate(d);
            let want = Rational::new(BigInt::one(), factorial(d as u32));
            prop_assert_eq!(product_expectation(&[&vars]).unwrap(), want);
        }

        #[test]
        fn moments_match_enumeration(seed in any::<u64>(), model in 0usize..3, r in 1u32..=4) {
            let model = [Model::Mas, Model::Betweenness, Model::RandomK][model];
            let params = GenParams { n: 5, m: 3, k: 3, allowed_fraction: 0.4 };
            let inst = generate(model, &params, seed).unwrap();
            prop_assert_eq!(
                exact_central_moment(&inst, r, DEFAULT_MOMENT_BUDGET).unwrap(),
                enumerated_moment(&inst, r)
            );
        }

        #[test]
        fn brute_force_mean_is_average(seed in any::<u64>()) {
            let params = GenParams { n: 6, m: 5, k: 3, allowed_fraction: 0.5 };
            let inst = generate(Model::RandomK, &params, seed).unwrap();
            prop_assert_eq!(brute_force_opt(&inst, 8).unwrap().1, inst.average_value());
        }
    }
}
