//! Piecewise polynomial functions on the order cells of `[-1,1]^S`.
//!
//! A cell `(v0, v1, …, v_{d-1})` is the region `x_{v0} < x_{v1} < … <
//! x_{v_{d-1}}`. Inside a [`ChainFunction`] each cell's polynomial is stored in
//! *positional* coordinates: polynomial variable `i` stands for the `i`-th
//! smallest coordinate of the cell, `x_{cell[i]}`. Positional pieces are
//! unchanged by renaming the underlying variables, so renamed copies share
//! their polynomials.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exact::{rat, Bound, Polynomial, Rational, VarId};
use crate::instance::Constraint;

/// A sorted set of variable ids, ordered by size and then lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct VarSet(SmallVec<[VarId; 6]>);

impl VarSet {
    pub fn new(vars: impl IntoIterator<Item = VarId>) -> Self {
        let mut v: SmallVec<[VarId; 6]> = vars.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VarSet(v)
    }

    pub fn empty() -> Self {
        VarSet::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[VarId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn is_subset(&self, other: &VarSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }

    pub fn union(&self, other: &VarSet) -> VarSet {
        VarSet::new(self.iter().chain(other.iter()))
    }

    pub fn intersection(&self, other: &VarSet) -> VarSet {
        VarSet(self.iter().filter(|&v| other.contains(v)).collect())
    }

    pub fn difference(&self, other: &VarSet) -> VarSet {
        VarSet(self.iter().filter(|&v| !other.contains(v)).collect())
    }

    /// All subsets, as bit masks over `self.as_slice()` resolved to sets.
    pub fn subsets(&self) -> impl Iterator<Item = VarSet> + '_ {
        (0u32..1 << self.len()).map(move |mask| {
            VarSet(
                self.0
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect(),
            )
        })
    }
}

impl Ord for VarSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for VarSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        f.write_str("}")
    }
}

/// The order cell `x_{order[0]} < x_{order[1]} < …`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cell(SmallVec<[VarId; 6]>);

impl Cell {
    pub fn new(order: impl IntoIterator<Item = VarId>) -> Self {
        let c: SmallVec<[VarId; 6]> = order.into_iter().collect();
        debug_assert!(VarSet::new(c.iter().copied()).len() == c.len(), "cell repeats a variable");
        Cell(c)
    }

    pub fn as_slice(&self) -> &[VarId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn position(&self, v: VarId) -> Option<usize> {
        self.0.iter().position(|&w| w == v)
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("<")?;
            }
            write!(f, "x{}", v + 1)?;
        }
        Ok(())
    }
}

/// A function `Σ_τ φ_τ(x) q_τ(x)` on `[-1,1]^support`, one polynomial per
/// order cell of the support. Absent cells are zero; the zero function has
/// no pieces.
#[derive(Clone, PartialEq, Eq)]
pub struct ChainFunction {
    support: VarSet,
    pieces: BTreeMap<Cell, Arc<Polynomial>>,
}

impl ChainFunction {
    pub fn zero(support: VarSet) -> Self {
        ChainFunction { support, pieces: BTreeMap::new() }
    }

    /// The constant `c` on the empty support.
    pub fn constant(c: Rational) -> Self {
        let mut f = ChainFunction::zero(VarSet::empty());
        f.insert(Cell::default(), Polynomial::constant(c));
        f
    }

    /// Builds a chain function from pieces whose polynomials are written in
    /// the ordinary variables (`x_v` is id `v`). Repeated cells are summed.
    pub fn from_pieces(
        support: VarSet,
        pieces: impl IntoIterator<Item = (Cell, Polynomial)>,
    ) -> Result<Self> {
        let mut f = ChainFunction::zero(support);
        for (cell, poly) in pieces {
            if cell.len() != f.support.len() || VarSet::new(cell.0.iter().copied()) != f.support {
                return Err(Error::SupportMismatch);
            }
            if poly.variables().iter().any(|&v| !f.support.contains(v)) {
                return Err(Error::SupportMismatch);
            }
            let positional = poly.relabel(|v| cell.position(v).expect("checked above") as VarId);
            f.accumulate(cell, Arc::new(positional));
        }
        Ok(f)
    }

    /// The indicator of a constraint: 1 on each allowed cell.
    pub fn from_constraint(c: &Constraint) -> Self {
        let support = VarSet::new(c.vars().iter().copied());
        let one = Arc::new(Polynomial::one());
        let pieces = c.orderings().map(|o| (Cell::new(o), one.clone())).collect();
        ChainFunction { support, pieces }
    }

    pub fn support(&self) -> &VarSet {
        &self.support
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn num_cells(&self) -> usize {
        self.pieces.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.pieces.keys()
    }

    /// Cell polynomials in positional coordinates.
    pub fn positional_pieces(&self) -> impl Iterator<Item = (&Cell, &Arc<Polynomial>)> {
        self.pieces.iter()
    }

    /// The polynomial on `cell`, written in the ordinary variables.
    pub fn piece(&self, cell: &Cell) -> Option<Polynomial> {
        self.pieces.get(cell).map(|p| p.relabel(|i| cell.0[i as usize]))
    }

    /// Largest total degree over all pieces.
    pub fn degree(&self) -> u32 {
        self.pieces.values().map(|p| p.degree()).max().unwrap_or(0)
    }

    /// The value on the empty support (zero for non-constant functions).
    pub fn constant_value(&self) -> Rational {
        match self.pieces.get(&Cell::default()) {
            Some(p) if self.support.is_empty() => p.constant_term(),
            _ => Rational::zero(),
        }
    }

    fn insert(&mut self, cell: Cell, poly: Polynomial) {
        if !poly.is_zero() {
            self.pieces.insert(cell, Arc::new(poly));
        }
    }

    fn accumulate(&mut self, cell: Cell, poly: Arc<Polynomial>) {
        if poly.is_zero() {
            return;
        }
        match self.pieces.entry(cell) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(poly);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().as_ref() + poly.as_ref();
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = Arc::new(sum);
                }
            }
        }
    }

    /// In-place cellwise sum; both functions must have the same support.
    pub fn add_assign(&mut self, other: &ChainFunction) -> Result<()> {
        if self.support != other.support {
            return Err(Error::SupportMismatch);
        }
        for (cell, p) in &other.pieces {
            self.accumulate(cell.clone(), p.clone());
        }
        Ok(())
    }

    pub fn add(&self, other: &ChainFunction) -> Result<ChainFunction> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> ChainFunction {
        if c.is_zero() {
            return ChainFunction::zero(self.support.clone());
        }
        if c.is_one() {
            return self.clone();
        }
        ChainFunction {
            support: self.support.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|(cell, p)| (cell.clone(), Arc::new(p.scale(c))))
                .collect(),
        }
    }

    /// Renames variables through an injective map. Pieces are shared.
    pub fn relabel(&self, map: impl Fn(VarId) -> VarId) -> ChainFunction {
        ChainFunction {
            support: VarSet::new(self.support.iter().map(&map)),
            pieces: self
                .pieces
                .iter()
                .map(|(cell, p)| (Cell::new(cell.0.iter().map(|&v| map(v))), p.clone()))
                .collect(),
        }
    }

    /// The same function viewed on a larger support: every cell is split
    /// into all interleavings with the new variables.
    pub fn refine(&self, superset: &VarSet) -> ChainFunction {
        assert!(self.support.is_subset(superset), "refine target must contain the support");
        if superset.len() == self.support.len() {
            return self.clone();
        }
        let extra = superset.difference(&self.support);
        let mut pieces = BTreeMap::new();
        for (cell, poly) in &self.pieces {
            let mut orders: Vec<SmallVec<[VarId; 6]>> = vec![cell.0.clone()];
            for w in extra.iter() {
                orders = orders
                    .iter()
                    .flat_map(|o| {
                        (0..=o.len()).map(move |at| {
                            let mut next = o.clone();
                            next.insert(at, w);
                            next
                        })
                    })
                    .collect();
            }
            for order in orders {
                let mut map: SmallVec<[VarId; 8]> = SmallVec::new();
                for (i, &v) in order.iter().enumerate() {
                    if self.support.contains(v) {
                        map.push(i as VarId);
                    }
                }
                let moved = if poly.is_zero() || map.iter().enumerate().all(|(i, &j)| i as VarId == j) {
                    poly.clone()
                } else {
                    Arc::new(poly.relabel_monotone(|i| map[i as usize]))
                };
                pieces.insert(Cell(order), moved);
            }
        }
        ChainFunction { support: superset.clone(), pieces }
    }

    /// Pointwise product; the result lives on the union of the supports.
    pub fn mul(&self, other: &ChainFunction) -> ChainFunction {
        let support = self.support.union(&other.support);
        let a = self.refine(&support);
        let b = other.refine(&support);
        let mut out = ChainFunction::zero(support);
        let (small, large) = if a.pieces.len() <= b.pieces.len() { (&a, &b) } else { (&b, &a) };
        for (cell, p) in &small.pieces {
            if let Some(q) = large.pieces.get(cell) {
                out.insert(cell.clone(), p.as_ref() * q.as_ref());
            }
        }
        out
    }

    /// `E[f | x_S]` under the uniform measure on `[-1,1]^support`.
    ///
    /// Variables outside `s` are integrated out one at a time in increasing
    /// id order, each between its cell neighbours (or ±1) with density 1/2.
    pub fn conditional_expectation(&self, s: &VarSet) -> ChainFunction {
        assert!(s.is_subset(&self.support), "conditioning set must lie in the support");
        let mut current = self.pieces.clone();
        for v in self.support.difference(s).iter() {
            let mut next: ChainFunction = ChainFunction::zero(VarSet::empty());
            for (cell, poly) in &current {
                let i = cell.position(v).expect("cell covers the support");
                let reduced = eliminate_position(poly, i, cell.len());
                let mut order = cell.0.clone();
                order.remove(i);
                next.accumulate(Cell(order), Arc::new(reduced));
            }
            current = next.pieces;
        }
        ChainFunction { support: s.clone(), pieces: current }
    }

    /// `E[f]` over the normalized cube.
    pub fn expectation(&self) -> Rational {
        self.conditional_expectation(&VarSet::empty()).constant_value()
    }

    /// `E[f^r]`, computed cell by cell.
    pub fn moment(&self, r: u32) -> Rational {
        let mut integrator = CellIntegrator::default();
        self.pieces
            .iter()
            .map(|(cell, p)| integrator.integrate(&power(p, r), cell.len()))
            .sum()
    }

    /// Value at a tie-free point that assigns the whole support.
    pub fn eval(&self, point: impl Fn(VarId) -> Option<Rational>) -> Result<Rational> {
        let mut values: SmallVec<[(Rational, VarId); 8]> = SmallVec::new();
        for v in self.support.iter() {
            values.push((point(v).ok_or(Error::MissingVariable(v))?, v));
        }
        values.sort();
        if let Some(w) = values.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Tie(w[0].1, w[1].1));
        }
        let cell = Cell(values.iter().map(|&(_, v)| v).collect());
        match self.pieces.get(&cell) {
            Some(p) => p.eval(|i| values.get(i as usize).map(|(x, _)| x.clone())),
            None => Ok(Rational::zero()),
        }
    }

    /// `(cell, rendered polynomial)` pairs in lexicographic cell order, with
    /// 1-based variable names.
    pub fn render_pieces(&self) -> Vec<(Vec<u32>, String)> {
        self.pieces
            .iter()
            .map(|(cell, p)| {
                let global = p.relabel(|i| cell.0[i as usize]);
                (cell.0.iter().map(|v| v + 1).collect(), global.to_string())
            })
            .collect()
    }
}

impl fmt::Debug for ChainFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChainFunction{:?}[", self.support)?;
        for (i, (cell, poly)) in self.render_pieces().iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            let cell: Vec<String> = cell.iter().map(|v| format!("x{v}")).collect();
            write!(f, "{}: {}", cell.join("<"), poly)?;
        }
        f.write_str("]")
    }
}

pub(crate) fn power(p: &Polynomial, r: u32) -> Polynomial {
    match r {
        0 => Polynomial::one(),
        1 => p.clone(),
        _ => {
            let half = power(p, r / 2);
            let sq = &half * &half;
            if r % 2 == 1 {
                &sq * p
            } else {
                sq
            }
        }
    }
}

/// Integrates positional variable `i` of a cell with `d` positions between
/// its neighbours (or ±1), divides by 2 and closes the gap in the numbering.
fn eliminate_position(p: &Polynomial, i: usize, d: usize) -> Polynomial {
    let i = i as VarId;
    let lower = if i == 0 { Bound::Value(rat(-1, 1)) } else { Bound::Var(i - 1) };
    let upper = if i as usize + 1 == d { Bound::Value(rat(1, 1)) } else { Bound::Var(i + 1) };
    let anti = p.antiderivative(i);
    let integral = &anti.substitute(i, &upper) - &anti.substitute(i, &lower);
    integral
        .scale(&rat(1, 2))
        .relabel_monotone(|j| if j > i { j - 1 } else { j })
}

/// Memoized integrals of positional monomials over a single order cell:
/// `E[φ_cell · ∏ y_i^{a_i}]` on `d` coordinates.
#[derive(Default)]
pub struct CellIntegrator {
    cache: HashMap<SmallVec<[u32; 8]>, Rational>,
}

impl CellIntegrator {
    /// `E[φ_cell · p]` for a positional polynomial `p` on a `d`-cell.
    pub fn integrate(&mut self, p: &Polynomial, d: usize) -> Rational {
        let mut total = Rational::zero();
        for (m, c) in p.terms() {
            let mut exps: SmallVec<[u32; 8]> = smallvec::smallvec![0; d];
            for &(v, e) in m.factors() {
                exps[v as usize] = e;
            }
            let value = self.cache.entry(exps).or_insert_with_key(|exps| {
                let mut q = Polynomial::monomial(
                    crate::exact::Monomial::from_pairs(
                        exps.iter().enumerate().map(|(i, &e)| (i as VarId, e)),
                    ),
                    Rational::one(),
                );
                for top in (0..d).rev() {
                    q = eliminate_position(&q, top, top + 1);
                }
                q.constant_term()
            });
            total += c * &*value;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Monomial;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn x(v: VarId) -> Polynomial {
        Polynomial::var(v)
    }

    fn indicator(order: &[VarId]) -> ChainFunction {
        ChainFunction::from_pieces(
            VarSet::new(order.iter().copied()),
            [(Cell::new(order.iter().copied()), Polynomial::one())],
        )
        .unwrap()
    }

    fn at(values: &[(VarId, Rational)]) -> impl Fn(VarId) -> Option<Rational> + '_ {
        move |v| values.iter().find(|(w, _)| *w == v).map(|(_, r)| r.clone())
    }

    #[test]
    fn from_constraint_examples() {
        let f = ChainFunction::from_constraint(&Constraint::mas(0, 1).unwrap());
        assert_eq!(f, indicator(&[0, 1]));
        let bt = ChainFunction::from_constraint(&Constraint::betweenness(0, 1, 2).unwrap());
        let cells: Vec<_> = bt.cells().map(|c| c.as_slice().to_vec()).collect();
        assert_eq!(cells, vec![vec![0, 1, 2], vec![2, 1, 0]]);
        let empty = Constraint::new(&[0, 1], Vec::<Vec<u8>>::new()).unwrap();
        assert!(ChainFunction::from_constraint(&empty).is_zero());
    }

    #[test]
    fn add_and_scale_examples() {
        let f = indicator(&[0, 1]);
        assert!(f.add(&f.scale(&rat(-1, 1))).unwrap().is_zero());
        let both = f.add(&indicator(&[1, 0])).unwrap();
        assert_eq!(both.num_cells(), 2);
        assert!(both.positional_pieces().all(|(_, p)| **p == Polynomial::one()));
        assert_eq!(f.scale(&rat(1, 2)).piece(&Cell::new([0, 1])), Some(Polynomial::constant(rat(1, 2))));
        assert_eq!(f.add(&indicator(&[0, 2])), Err(Error::SupportMismatch));
    }

    #[test]
    fn refine_examples() {
        let r = indicator(&[0, 1]).refine(&VarSet::new([0, 1, 2]));
        let cells: Vec<_> = r.cells().map(|c| c.as_slice().to_vec()).collect();
        assert_eq!(cells, vec![vec![0, 1, 2], vec![0, 2, 1], vec![2, 0, 1]]);
        assert!(ChainFunction::zero(VarSet::new([0])).refine(&VarSet::new([0, 1])).is_zero());
        let c = ChainFunction::constant(rat(3, 4)).refine(&VarSet::new([0]));
        assert_eq!(c.piece(&Cell::new([0])), Some(Polynomial::constant(rat(3, 4))));
    }

    #[test]
    fn refine_keeps_polynomials_on_moved_positions() {
        let f = ChainFunction::from_pieces(VarSet::new([0, 2]), [(Cell::new([2, 0]), &x(0) - &x(2))]).unwrap();
        let r = f.refine(&VarSet::new([0, 1, 2]));
        for cell in r.cells() {
            assert_eq!(r.piece(cell), Some(&x(0) - &x(2)));
        }
    }

    #[test]
    fn mul_examples() {
        let f = indicator(&[0, 1]);
        assert_eq!(f.mul(&f), f);
        assert!(f.mul(&indicator(&[1, 0])).is_zero());
        let s = VarSet::new([0, 1]);
        let a = ChainFunction::from_pieces(s.clone(), [(Cell::new([0, 1]), x(0))]).unwrap();
        let b = ChainFunction::from_pieces(s.clone(), [(Cell::new([0, 1]), x(1))]).unwrap();
        let prod = ChainFunction::from_pieces(s, [(Cell::new([0, 1]), &x(0) * &x(1))]).unwrap();
        assert_eq!(a.mul(&b), prod);
    }

    #[test]
    fn conditional_expectation_examples() {
        // ∫_{x1}^{1} dx2 / 2
        let e = indicator(&[0, 1]).conditional_expectation(&VarSet::new([0]));
        let want = (&Polynomial::one() - &x(0)).scale(&rat(1, 2));
        assert_eq!(e, ChainFunction::from_pieces(VarSet::new([0]), [(Cell::new([0]), want)]).unwrap());

        let chain = indicator(&[0, 1, 2]);
        let e = chain.conditional_expectation(&VarSet::new([0, 2]));
        let want = (&x(2) - &x(0)).scale(&rat(1, 2));
        assert_eq!(e, ChainFunction::from_pieces(VarSet::new([0, 2]), [(Cell::new([0, 2]), want)]).unwrap());

        // ((1 - x1)/2)^2 / 2!
        let e = chain.conditional_expectation(&VarSet::new([0]));
        let h = &Polynomial::one() - &x(0);
        let want = (&h * &h).scale(&rat(1, 8));
        assert_eq!(e, ChainFunction::from_pieces(VarSet::new([0]), [(Cell::new([0]), want)]).unwrap());
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(indicator(&[0, 1]).expectation(), rat(1, 2));
        assert_eq!(indicator(&[0, 1, 2]).expectation(), rat(1, 6));
        assert_eq!(ChainFunction::zero(VarSet::new([0, 1])).expectation(), rat(0, 1));
    }

    #[test]
    fn moment_examples() {
        assert_eq!(indicator(&[0, 1]).moment(2), rat(1, 2));
        let half = ChainFunction::from_pieces(VarSet::new([0]), [(Cell::new([0]), x(0).scale(&rat(-1, 2)))]).unwrap();
        assert_eq!(half.moment(2), rat(1, 12));
        assert_eq!(half.moment(4), rat(1, 80));
        assert_eq!(half.moment(3), rat(0, 1));
    }

    #[test]
    fn eval_examples() {
        let f = indicator(&[0, 1]);
        assert_eq!(f.eval(at(&[(0, rat(-1, 2)), (1, rat(1, 3))])).unwrap(), rat(1, 1));
        assert_eq!(f.eval(at(&[(0, rat(1, 3)), (1, rat(-1, 2))])).unwrap(), rat(0, 1));
        assert_eq!(f.eval(at(&[(0, rat(1, 3)), (1, rat(1, 3))])), Err(Error::Tie(0, 1)));
        assert_eq!(f.eval(at(&[(0, rat(1, 3))])), Err(Error::MissingVariable(1)));
    }

    #[test]
    fn render_uses_cell_order_and_one_based_names() {
        let f = ChainFunction::from_pieces(
            VarSet::new([0, 1]),
            [(Cell::new([1, 0]), &x(0) - &x(1)), (Cell::new([0, 1]), Polynomial::one())],
        )
        .unwrap();
        assert_eq!(
            f.render_pieces(),
            vec![(vec![1, 2], "1".to_string()), (vec![2, 1], "x1 - x2".to_string())]
        );
    }

    #[test]
    fn indicator_expectation_counts_allowed() {
        let c = Constraint::new(&[3, 1, 2], [vec![0, 1, 2], vec![1, 0, 2], vec![2, 1, 0]]).unwrap();
        assert_eq!(ChainFunction::from_constraint(&c).expectation(), rat(3, 6));
    }

    #[test]
    fn monte_carlo_agrees_with_expectation() {
        let s = VarSet::new([0, 1, 2]);
        let f = ChainFunction::from_pieces(
            s.clone(),
            [
                (Cell::new([0, 1, 2]), &(&x(0) * &x(1)) + &x(2)),
                (Cell::new([2, 0, 1]), (&x(2) * &x(2)).scale(&rat(3, 1))),
                (Cell::new([1, 2, 0]), Polynomial::constant(rat(-1, 2))),
            ],
        )
        .unwrap();
        let exact = {
            use num_traits::ToPrimitive;
            f.expectation().to_f64().unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = 100_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..samples {
            // Dyadic rationals with 2^20 denominators; ties are vanishingly rare.
            let pt: Vec<Rational> = (0..3)
                .map(|_| rat(rng.gen_range(-(1 << 20)..(1 << 20)), 1 << 20))
                .collect();
            let v = match f.eval(|v| pt.get(v as usize).cloned()) {
                Ok(v) => {
                    use num_traits::ToPrimitive;
                    v.to_f64().unwrap()
                }
                Err(_) => continue,
            };
            sum += v;
            sq += v * v;
        }
        let mean = sum / samples as f64;
        let se = ((sq / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!((mean - exact).abs() <= 4.0 * se, "mean {mean} exact {exact} se {se}");
    }

    fn chain_function() -> impl Strategy<Value = ChainFunction> {
        (1usize..=4, any::<u64>()).prop_map(|(d, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let support = VarSet::new(0..d as VarId);
            let mut pieces = Vec::new();
            for p in crate::perm::all_permutations(d) {
                if !rng.gen_bool(0.5) {
                    continue;
                }
                let mut terms = Vec::new();
                for _ in 0..rng.gen_range(0..4) {
                    let pairs: Vec<_> = (0..rng.gen_range(0..3))
                        .map(|_| (rng.gen_range(0..d as VarId), rng.gen_range(1..3)))
                        .collect();
                    terms.push((Monomial::from_pairs(pairs), rat(rng.gen_range(-4..=4), rng.gen_range(1..=3))));
                }
                pieces.push((Cell::new(p.into_iter().map(VarId::from)), Polynomial::from_terms(terms)));
            }
            ChainFunction::from_pieces(support, pieces).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conditional_expectation_nests(f in chain_function(), a in any::<u8>(), b in any::<u8>()) {
            let s = VarSet::new(f.support().iter().filter(|v| a >> v & 1 == 1));
            let t = VarSet::new(s.iter().filter(|v| b >> v & 1 == 1));
            let nested = f.conditional_expectation(&s).conditional_expectation(&t);
            prop_assert_eq!(nested, f.conditional_expectation(&t));
            prop_assert_eq!(f.conditional_expectation(&s).expectation(), f.expectation());
        }

        #[test]
        fn refinement_preserves_value_and_mean(f in chain_function(), seed in any::<u64>()) {
            let wider = f.support().union(&VarSet::new([5, 6]));
            let r = f.refine(&wider);
            prop_assert_eq!(r.expectation(), f.expectation());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pt: Vec<Rational> = rand::seq::index::sample(&mut rng, 200, 7)
                .into_iter()
                .map(|i| rat(i as i64 - 100, 101))
                .collect();
            let point = |v: VarId| pt.get(v as usize).cloned();
            prop_assert_eq!(r.eval(point).unwrap(), f.eval(point).unwrap());
        }

        #[test]
        fn moment_matches_product_route(f in chain_function()) {
            prop_assert_eq!(f.moment(2), f.mul(&f).expectation());
            prop_assert_eq!(f.moment(1), f.expectation());
        }
    }
}
