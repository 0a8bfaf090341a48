use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;

use super::rational::{pow, Rational};
use crate::error::{Error, Result};

/// Integer identifier of a polynomial variable. Rendered 1-based (`x1` is id 0).
pub type VarId = u32;

/// A power product `∏ x_v^e` with every stored exponent positive, sorted by
/// variable id.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(VarId, u32); 4]>);

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        Self::power(v, 1)
    }

    pub fn power(v: VarId, exp: u32) -> Self {
        if exp == 0 {
            Self::one()
        } else {
            Monomial(smallvec::smallvec![(v, exp)])
        }
    }

    /// Builds a monomial from arbitrary `(var, exp)` pairs; repeated
    /// variables are combined and zero exponents dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, u32)>) -> Self {
        let mut acc: BTreeMap<VarId, u32> = BTreeMap::new();
        for (v, e) in pairs {
            *acc.entry(v).or_default() += e;
        }
        Monomial(acc.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, v: VarId) -> u32 {
        self.0
            .binary_search_by_key(&v, |&(w, _)| w)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(VarId, u32)] {
        &self.0
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Splits off the power of `v`: returns (exponent of v, rest).
    fn split(&self, v: VarId) -> (u32, Monomial) {
        match self.0.binary_search_by_key(&v, |&(w, _)| w) {
            Ok(i) => {
                let mut rest = self.0.clone();
                let (_, e) = rest.remove(i);
                (e, Monomial(rest))
            }
            Err(_) => (0, self.clone()),
        }
    }

    fn with_power(&self, v: VarId, exp: u32) -> Monomial {
        self.mul(&Monomial::power(v, exp))
    }
}

/// Graded lexicographic order: lower total degree first; within a degree,
/// the monomial with the larger exponent on the smallest differing variable
/// comes first (`x1^2 < x1*x2 < x2^2`).
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let (a, b) = (&self.0, &other.0);
            for k in 0..a.len().max(b.len()) {
                match (a.get(k), b.get(k)) {
                    (Some(&(va, ea)), Some(&(vb, eb))) => {
                        if va != vb {
                            return va.cmp(&vb);
                        }
                        if ea != eb {
                            return eb.cmp(&ea);
                        }
                    }
                    (Some(_), None) => return Ordering::Less,
                    (None, Some(_)) => return Ordering::Greater,
                    (None, None) => break,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return f.write_str("1");
        }
        write_monomial(f, self, &|v| format!("x{}", v + 1))
    }
}

fn write_monomial(
    f: &mut impl fmt::Write,
    m: &Monomial,
    name: &dyn Fn(VarId) -> String,
) -> fmt::Result {
    for (k, &(v, e)) in m.0.iter().enumerate() {
        if k > 0 {
            f.write_char('*')?;
        }
        f.write_str(&name(v))?;
        if e > 1 {
            write!(f, "^{e}")?;
        }
    }
    Ok(())
}

/// Right-hand side of a substitution `v := bound`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bound {
    Var(VarId),
    Value(Rational),
}

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Terms are kept sorted by the graded lexicographic monomial order with no
/// zero coefficients, so structural equality is polynomial equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: Vec<(Monomial, Rational)>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(Monomial::one(), c)
    }

    pub fn var(v: VarId) -> Self {
        Self::monomial(Monomial::var(v), Rational::one())
    }

    pub fn monomial(m: Monomial, c: Rational) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            Polynomial { terms: vec![(m, c)] }
        }
    }

    /// Sums arbitrary (possibly repeated, possibly zero) terms into canonical form.
    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (m, c) in terms {
            *acc.entry(m).or_insert_with(Rational::zero) += c;
        }
        Polynomial {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn terms(&self) -> &[(Monomial, Rational)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(m, _)| m.degree()).max().unwrap_or(0)
    }

    pub fn constant_term(&self) -> Rational {
        match self.terms.first() {
            Some((m, c)) if m.is_one() => c.clone(),
            _ => Rational::zero(),
        }
    }

    /// Variables occurring with a positive exponent, ascending.
    pub fn variables(&self) -> Vec<VarId> {
        let mut vars: Vec<VarId> = self
            .terms
            .iter()
            .flat_map(|(m, _)| m.0.iter().map(|&(v, _)| v))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    /// Antiderivative in `v` without a `v`-free constant of integration.
    pub fn antiderivative(&self, v: VarId) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| {
            let e = m.exponent(v);
            let (_, rest) = m.split(v);
            (rest.with_power(v, e + 1), c / Rational::from_integer((e + 1).into()))
        }))
    }

    /// Replaces every occurrence of `v` by `bound`.
    pub fn substitute(&self, v: VarId, bound: &Bound) -> Polynomial {
        if let Bound::Var(w) = bound {
            assert_ne!(*w, v, "substitution variable must differ from the replaced one");
        }
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| {
            let (e, rest) = m.split(v);
            match bound {
                Bound::Var(w) => (rest.with_power(*w, e), c.clone()),
                Bound::Value(x) => (rest, c * pow(x, e)),
            }
        }))
    }

    /// Renames variables through `map`. The map must be injective on the
    /// variables of `self`.
    pub fn relabel(&self, map: impl Fn(VarId) -> VarId) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| {
            (Monomial::from_pairs(m.0.iter().map(|&(v, e)| (map(v), e))), c.clone())
        }))
    }

    /// Like [`relabel`](Self::relabel) for a strictly increasing map, which
    /// preserves the term order and needs no re-sorting.
    pub(crate) fn relabel_monotone(&self, map: impl Fn(VarId) -> VarId) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (Monomial(m.0.iter().map(|&(v, e)| (map(v), e)).collect()), c.clone()))
                .collect(),
        }
    }

    /// Exact value at `point`, which must assign every occurring variable.
    pub fn eval(&self, point: impl Fn(VarId) -> Option<Rational>) -> Result<Rational> {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for &(v, e) in m.factors() {
                let x = point(v).ok_or(Error::MissingVariable(v))?;
                term *= pow(&x, e);
            }
            total += term;
        }
        Ok(total)
    }

    /// Evaluates with a dense slice indexed by variable id.
    pub fn eval_slice(&self, point: &[Rational]) -> Result<Rational> {
        self.eval(|v| point.get(v as usize).cloned())
    }

    /// Renders with a custom variable naming, e.g. `1/4 - 1/2*x1 + 1/4*x1^2`.
    pub fn render(&self, name: &dyn Fn(VarId) -> String) -> String {
        let mut out = String::new();
        if self.terms.is_empty() {
            out.push('0');
            return out;
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let magnitude = c.abs();
            if k == 0 {
                if c.is_negative() {
                    out.push('-');
                }
            } else if c.is_negative() {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            if m.is_one() {
                out.push_str(&magnitude.to_string());
            } else {
                if !magnitude.is_one() {
                    out.push_str(&magnitude.to_string());
                    out.push('*');
                }
                write_monomial(&mut out, m, name).expect("writing to a String");
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|v| format!("x{}", v + 1)))
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, other: &Polynomial) -> Polynomial {
        let (a, b) = (&self.terms, &other.terms);
        let mut terms = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    terms.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    terms.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &a[i].1 + &b[j].1;
                    if !c.is_zero() {
                        terms.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        terms.extend_from_slice(&a[i..]);
        terms.extend_from_slice(&b[j..]);
        Polynomial { terms }
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, other: &Polynomial) -> Polynomial {
        self + &(-other)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        Polynomial::from_terms(self.terms.iter().flat_map(|(ma, ca)| {
            other.terms.iter().map(move |(mb, cb)| (ma.mul(mb), ca * cb))
        }))
    }
}

macro_rules! forward_owned {
    ($($tr:ident $method:ident),*) => {$(
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, other: Polynomial) -> Polynomial {
                (&self).$method(&other)
            }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);
