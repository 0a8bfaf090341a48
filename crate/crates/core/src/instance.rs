//! Ordering CSP instances: model, text format, generators, direct evaluation.

use std::collections::HashSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exact::{Rational, VarId};
use crate::perm;

pub const DEFAULT_MAX_ARITY: usize = 6;
/// Largest arity any constraint may have regardless of configuration.
pub const HARD_MAX_ARITY: usize = 8;

/// Permutation of constraint-local positions `0..d`.
pub type LocalPerm = SmallVec<[u8; 8]>;

/// A set of allowed orderings of a tuple of distinct variables.
///
/// An allowed permutation `p` reads `x[vars[p[0]]] < x[vars[p[1]]] < …`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    vars: SmallVec<[VarId; 8]>,
    allowed: Vec<LocalPerm>,
    mask: Vec<u64>,
}

impl Constraint {
    /// Builds a constraint from its variable tuple and allowed local
    /// permutations. The allowed list is stored sorted.
    pub fn new(vars: &[VarId], allowed: impl IntoIterator<Item = Vec<u8>>) -> Result<Self> {
        let d = vars.len();
        if d == 0 || d > HARD_MAX_ARITY {
            return Err(Error::InvalidConstraint(format!("arity {d} outside 1..={HARD_MAX_ARITY}")));
        }
        let distinct: HashSet<_> = vars.iter().collect();
        if distinct.len() != d {
            return Err(Error::InvalidConstraint("repeated variable".into()));
        }
        let mut perms: Vec<LocalPerm> = Vec::new();
        for p in allowed {
            let mut sorted = p.clone();
            sorted.sort_unstable();
            if !sorted.iter().copied().eq(0..d as u8) {
                return Err(Error::InvalidConstraint(format!("{p:?} is not a permutation of 0..{d}")));
            }
            perms.push(p.into_iter().collect());
        }
        perms.sort();
        if perms.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConstraint("duplicate permutation".into()));
        }
        let mut mask = vec![0u64; perm::factorial(d).div_ceil(64)];
        for p in &perms {
            let r = perm::rank(p);
            mask[r / 64] |= 1 << (r % 64);
        }
        Ok(Constraint { vars: vars.iter().copied().collect(), allowed: perms, mask })
    }

    /// Builds a constraint from orderings of global variables, the first of
    /// which fixes the variable tuple.
    pub fn from_orderings(vars: &[VarId], orderings: &[Vec<VarId>]) -> Result<Self> {
        let local = orderings
            .iter()
            .map(|o| {
                o.iter()
                    .map(|v| vars.iter().position(|w| w == v).map(|i| i as u8))
                    .collect::<Option<Vec<u8>>>()
                    .ok_or_else(|| Error::InvalidConstraint("ordering uses foreign variables".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Constraint::new(vars, local)
    }

    /// `x[a] < x[b]`.
    pub fn mas(a: VarId, b: VarId) -> Result<Self> {
        Constraint::new(&[a, b], [vec![0, 1]])
    }

    /// `b` lies between `a` and `c`.
    pub fn betweenness(a: VarId, b: VarId, c: VarId) -> Result<Self> {
        Constraint::new(&[a, b, c], [vec![0, 1, 2], vec![2, 1, 0]])
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn allowed(&self) -> &[LocalPerm] {
        &self.allowed
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.allowed.len() == perm::factorial(self.arity())
    }

    /// Allowed orderings expressed with global variable ids.
    pub fn orderings(&self) -> impl Iterator<Item = Vec<VarId>> + '_ {
        self.allowed
            .iter()
            .map(|p| p.iter().map(|&i| self.vars[i as usize]).collect())
    }

    /// Whether the ordering given by `pos` (variable id → rank) satisfies this
    /// constraint.
    pub fn satisfied_by(&self, pos: &[usize]) -> bool {
        let d = self.arity();
        let mut order: SmallVec<[u8; 8]> = (0..d as u8).collect();
        order.sort_unstable_by_key(|&i| pos[self.vars[i as usize] as usize]);
        let r = perm::rank(&order);
        self.mask[r / 64] >> (r % 64) & 1 == 1
    }
}

/// Variables `0..n` plus a multiset of constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    constraints: Vec<Constraint>,
}

impl Instance {
    pub fn new(n: usize, constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            if let Some(&v) = c.vars().iter().find(|&&v| v as usize >= n) {
                return Err(Error::InvalidConstraint(format!(
                    "variable x{} out of range for {n} variables",
                    v + 1
                )));
            }
        }
        Ok(Instance { n, constraints })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Maximum constraint length; 0 for an instance without constraints.
    pub fn arity(&self) -> usize {
        self.constraints.iter().map(Constraint::arity).max().unwrap_or(0)
    }

    /// Number of constraints satisfied by `ord`.
    pub fn evaluate(&self, ord: &Ordering) -> usize {
        self.evaluate_positions(&ord.positions())
    }

    pub fn evaluate_positions(&self, pos: &[usize]) -> usize {
        self.constraints.iter().filter(|c| c.satisfied_by(pos)).count()
    }

    /// Expected number of satisfied constraints under a uniform ordering.
    pub fn average_value(&self) -> Rational {
        self.constraints
            .iter()
            .map(|c| {
                Rational::new(
                    BigInt::from(c.allowed().len()),
                    BigInt::from(perm::factorial(c.arity())),
                )
            })
            .sum()
    }

    /// Renders the instance in the line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("ocsp 1\nnvars {}\n", self.n);
        for c in &self.constraints {
            out.push_str("con");
            if c.is_empty() {
                out.push_str(" -");
                for v in c.vars() {
                    let _ = write!(out, " {}", v + 1);
                }
            }
            for (k, o) in c.orderings().enumerate() {
                if k > 0 {
                    out.push_str(" |");
                }
                for v in o {
                    let _ = write!(out, " {}", v + 1);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// A linear ordering of all variables, listed from smallest to largest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ordering(Vec<VarId>);

impl Ordering {
    pub fn new(perm: Vec<VarId>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &v in &perm {
            match seen.get_mut(v as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(Error::InvalidParameter("ordering is not a permutation".into())),
            }
        }
        Ok(Ordering(perm))
    }

    pub fn identity(n: usize) -> Self {
        Ordering((0..n as VarId).collect())
    }

    pub fn as_slice(&self) -> &[VarId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<VarId> {
        self.0
    }

    /// Inverse map: `positions()[v]` is the rank of variable `v`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (r, &v) in self.0.iter().enumerate() {
            pos[v as usize] = r;
        }
        pos
    }
}

pub fn parse_instance(text: &[u8]) -> Result<Instance> {
    parse_instance_with(text, DEFAULT_MAX_ARITY)
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax { line, column, message: message.into() }
}

/// Splits a line into `(1-based column, token)` pairs; `|` is always a token
/// of its own.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() || ch == '|' {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
            if ch == '|' {
                out.push((i + 1, "|"));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

/// Parses the instance text format with an explicit arity limit.
pub fn parse_instance_with(text: &[u8], max_arity: usize) -> Result<Instance> {
    let max_arity = max_arity.min(HARD_MAX_ARITY);
    let text = std::str::from_utf8(text).map_err(|e| {
        let prefix = &text[..e.valid_up_to()];
        let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = prefix.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        syntax(line, column, "invalid UTF-8")
    })?;

    let mut header = false;
    let mut n: Option<usize> = None;
    let mut constraints = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(&(col, keyword)) = tokens.first() else { continue };
        if !header {
            if tokens.len() == 2 && keyword == "ocsp" && tokens[1].1 == "1" {
                header = true;
                continue;
            }
            return Err(syntax(line, col, "expected header `ocsp 1`"));
        }
        match keyword {
            "nvars" => {
                if n.is_some() {
                    return Err(syntax(line, col, "`nvars` given twice"));
                }
                match tokens.as_slice() {
                    [_, (vc, value)] => {
                        n = Some(value.parse().map_err(|_| syntax(line, *vc, "expected a variable count"))?)
                    }
                    _ => return Err(syntax(line, col, "expected `nvars <n>`")),
                }
            }
            "con" => {
                let n = n.ok_or_else(|| syntax(line, col, "`con` before `nvars`"))?;
                constraints.push(parse_constraint(line, &tokens[1..], n, max_arity, col + 3)?);
            }
            other => return Err(syntax(line, col, format!("unknown directive `{other}`"))),
        }
    }
    if !header {
        return Err(syntax(1, 1, "missing header `ocsp 1`"));
    }
    let n = n.ok_or_else(|| syntax(text.lines().count().max(1), 1, "missing `nvars`"))?;
    Instance::new(n, constraints)
}

fn parse_constraint(
    line: usize,
    tokens: &[(usize, &str)],
    n: usize,
    max_arity: usize,
    end_col: usize,
) -> Result<Constraint> {
    let (empty, tokens) = match tokens.first() {
        Some(&(_, "-")) => (true, &tokens[1..]),
        _ => (false, tokens),
    };
    let mut groups: Vec<Vec<VarId>> = vec![Vec::new()];
    let mut last_col = end_col;
    for &(col, tok) in tokens {
        last_col = col + tok.len();
        if tok == "|" {
            if empty || groups.last().is_some_and(Vec::is_empty) {
                return Err(syntax(line, col, "unexpected `|`"));
            }
            groups.push(Vec::new());
            continue;
        }
        let var: usize = tok
            .parse()
            .map_err(|_| syntax(line, col, format!("expected a variable index, found `{tok}`")))?;
        if var == 0 || var > n {
            return Err(Error::VariableOutOfRange { line, var, n });
        }
        let group = groups.last_mut().expect("at least one group");
        if group.contains(&(var as VarId - 1)) {
            return Err(Error::DuplicateVariable { line, var });
        }
        group.push(var as VarId - 1);
    }
    if groups.last().is_some_and(Vec::is_empty) {
        return Err(syntax(line, last_col, "expected a variable index"));
    }
    let vars = groups[0].clone();
    if vars.len() > max_arity {
        return Err(Error::ArityExceeded { line, arity: vars.len(), max: max_arity });
    }
    let mut key = vars.clone();
    key.sort_unstable();
    let mut seen = HashSet::new();
    for g in &groups {
        let mut sorted = g.clone();
        sorted.sort_unstable();
        if sorted != key {
            return Err(Error::MismatchedPermutation { line });
        }
        if !seen.insert(g.clone()) {
            return Err(Error::DuplicatePermutation { line });
        }
    }
    let orderings = if empty { Vec::new() } else { groups };
    Constraint::from_orderings(&vars, &orderings)
}

/// Built-in random instance families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Model {
    /// Maximum acyclic subgraph: one `a < b` constraint per arc.
    Mas,
    /// `b` between `a` and `c`.
    Betweenness,
    /// Random allowed sets on random k-tuples.
    RandomK,
}

#[derive(Clone, Debug)]
pub struct GenParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub allowed_fraction: f64,
}

/// Deterministic random instance for `(model, params, seed)`.
///
/// MAS arcs are drawn without repetition of the underlying pair while
/// `m` does not exceed the number of pairs.
pub fn generate(model: Model, params: &GenParams, seed: u64) -> Result<Instance> {
    let GenParams { n, m, k, allowed_fraction } = *params;
    let arity = match model {
        Model::Mas => 2,
        Model::Betweenness => 3,
        Model::RandomK => k,
    };
    if arity == 0 || arity > HARD_MAX_ARITY || n < arity {
        return Err(Error::InvalidParameter(format!(
            "need n >= k >= 1 and k <= {HARD_MAX_ARITY} (n = {n}, k = {arity})"
        )));
    }
    if !(0.0..=1.0).contains(&allowed_fraction) {
        return Err(Error::InvalidParameter("allowed fraction must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tuple = |rng: &mut ChaCha8Rng| -> Vec<VarId> {
        index::sample(rng, n, arity).into_iter().map(|v| v as VarId).collect()
    };
    let mut constraints = Vec::with_capacity(m);
    match model {
        Model::Mas => {
            let pairs = n * (n - 1) / 2;
            if m <= pairs {
                for p in index::sample(&mut rng, pairs, m) {
                    let (a, b) = unrank_pair(p);
                    let (a, b) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
                    constraints.push(Constraint::mas(a, b)?);
                }
            } else {
                for _ in 0..m {
                    let t = tuple(&mut rng);
                    constraints.push(Constraint::mas(t[0], t[1])?);
                }
            }
        }
        Model::Betweenness => {
            for _ in 0..m {
                let t = tuple(&mut rng);
                constraints.push(Constraint::betweenness(t[0], t[1], t[2])?);
            }
        }
        Model::RandomK => {
            let perms = perm::all_permutations(arity);
            for _ in 0..m {
                let t = tuple(&mut rng);
                let allowed: Vec<Vec<u8>> = perms
                    .iter()
                    .filter(|_| rng.gen_bool(allowed_fraction))
                    .cloned()
                    .collect();
                constraints.push(Constraint::new(&t, allowed)?);
            }
        }
    }
    Instance::new(n, constraints)
}

/// Inverse of `j*(j-1)/2 + i` for `i < j`.
fn unrank_pair(p: usize) -> (VarId, VarId) {
    let mut j = (((8.0 * p as f64 + 1.0).sqrt() + 1.0) / 2.0) as usize;
    while j * (j - 1) / 2 > p {
        j -= 1;
    }
    while (j + 1) * j / 2 <= p {
        j += 1;
    }
    ((p - j * (j - 1) / 2) as VarId, j as VarId)
}
