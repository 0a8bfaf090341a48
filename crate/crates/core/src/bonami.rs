//! Floating-point checks of the fourth-moment chain
//! `E f⁴ ≤ C·E M⁴ ≤ 81^d·C·(E M²)²` through the surrogate polynomial
//! `M(Z) = Σ_S M_S ∏_{i∈S} Z_i`, with `M_S = 3^{-|S|/2}·E[f_S²]^{1/2}` and
//! `Z` taking 3 with probability 1/4 and -1 otherwise.
//!
//! This module is diagnostic only; no exact result depends on it.

use std::collections::HashMap;

use num_traits::ToPrimitive;

use crate::chain::VarSet;
use crate::efron_stein::EsDecomposition;
use crate::error::{Error, Result};
use crate::exact::{pow, rat, Rational, VarId};

/// Relative tolerance for all floating comparisons.
pub const TOLERANCE: f64 = 1e-9;

/// Default bound on the number of ordered part quadruples.
pub const DEFAULT_QUADRUPLE_BUDGET: u128 = 1 << 32;

/// The two-point law of `Z` as `(value, probability)`.
pub fn z_distribution() -> [(Rational, Rational); 2] {
    [(rat(3, 1), rat(1, 4)), (rat(-1, 1), rat(3, 4))]
}

/// `E[Z^m]` for `m = 1..=4`.
pub fn z_moments() -> [Rational; 4] {
    let law = z_distribution();
    std::array::from_fn(|i| law.iter().map(|(z, p)| pow(z, i as u32 + 1) * p).sum())
}

fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `M_S` for every stored part.
pub fn surrogate_coefficients(dec: &EsDecomposition) -> Vec<(VarSet, f64)> {
    dec.second_moments()
        .iter()
        .map(|(s, m2)| (s.clone(), (to_f64(m2) / 3f64.powi(s.len() as i32)).sqrt()))
        .collect()
}

/// Neumaier summation.
#[derive(Default)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.carry
    }
}

/// `(E[M²], E[M⁴])`. Only ordered quadruples covering every index at least
/// twice contribute to the fourth moment, since `E Z = 0`.
pub fn surrogate_moments(dec: &EsDecomposition, budget: u128) -> Result<(f64, f64)> {
    let coeffs = surrogate_coefficients(dec);
    let p = coeffs.len();
    let needed = (p as u128).pow(4);
    if needed > budget {
        return Err(Error::BudgetExceeded { what: "part quadruples", needed, budget });
    }
    let zm: Vec<f64> = z_moments().iter().map(to_f64).collect();
    let mut em2 = Sum::default();
    for (s, m) in &coeffs {
        em2.add(m * m * zm[1].powi(s.len() as i32));
    }
    Ok((em2.value(), fourth_moment(&coeffs)))
}

/// `E[M⁴]` for explicit coefficients.
fn fourth_moment(coeffs: &[(VarSet, f64)]) -> f64 {
    let p = coeffs.len();
    let zm: Vec<f64> = z_moments().iter().map(to_f64).collect();
    let mut vars: Vec<VarId> = coeffs.iter().flat_map(|(s, _)| s.iter()).collect();
    vars.sort_unstable();
    vars.dedup();
    let local: HashMap<VarId, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let masks: Vec<Vec<u64>> = coeffs
        .iter()
        .map(|(s, _)| {
            let mut bits = vec![0u64; vars.len().div_ceil(64)];
            for v in s.iter() {
                let i = local[&v];
                bits[i / 64] |= 1 << (i % 64);
            }
            bits
        })
        .collect();
    let words = vars.len().div_ceil(64);

    // Per-index multiplicities tracked as exact-count bit layers.
    #[derive(Clone)]
    struct Cover {
        layers: [Vec<u64>; 4],
    }
    impl Cover {
        fn add(&self, x: &[u64]) -> Cover {
            let [e1, e2, e3, e4] = &self.layers;
            let mut out = self.clone();
            for w in 0..x.len() {
                let any = e1[w] | e2[w] | e3[w] | e4[w];
                out.layers[3][w] = e4[w] | (e3[w] & x[w]);
                out.layers[2][w] = (e3[w] & !x[w]) | (e2[w] & x[w]);
                out.layers[1][w] = (e2[w] & !x[w]) | (e1[w] & x[w]);
                out.layers[0][w] = (e1[w] & !x[w]) | (x[w] & !any);
            }
            out
        }
        fn count(&self, layer: usize) -> i32 {
            self.layers[layer].iter().map(|w| w.count_ones() as i32).sum()
        }
    }
    let empty = Cover { layers: std::array::from_fn(|_| vec![0; words]) };

    let mut em4 = Sum::default();
    for a in 0..p {
        let ca = empty.add(&masks[a]);
        for b in 0..p {
            let cb = ca.add(&masks[b]);
            for c in 0..p {
                let cc = cb.add(&masks[c]);
                let single = &cc.layers[0];
                for d in 0..p {
                    if masks[d].iter().zip(single).any(|(m, s)| s & !m != 0) {
                        continue;
                    }
                    let cd = cc.add(&masks[d]);
                    if cd.count(0) > 0 {
                        continue;
                    }
                    let z = zm[1].powi(cd.count(1)) * zm[2].powi(cd.count(2)) * zm[3].powi(cd.count(3));
                    em4.add(coeffs[a].1 * coeffs[b].1 * coeffs[c].1 * coeffs[d].1 * z);
                }
            }
        }
    }
    em4.value()
}

/// One inequality or identity of the chain with its slack.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs` for inequalities, `-|rhs - lhs|` for the identity.
    pub slack: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BonamiWitness {
    pub z_moments: [Rational; 4],
    pub m_coeffs: Vec<(VarSet, f64)>,
    pub em2: f64,
    pub em4: f64,
    pub ef2: Rational,
    pub ef4: Rational,
    pub c: Rational,
    pub degree: usize,
    pub checks: Vec<Check>,
}

impl BonamiWitness {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn leq(name: &'static str, lhs: f64, rhs: f64) -> Check {
    let slack = rhs - lhs;
    let passed = slack >= -TOLERANCE * lhs.abs().max(rhs.abs());
    Check { name, lhs, rhs, slack, passed }
}

fn equal(name: &'static str, lhs: f64, rhs: f64) -> Check {
    let diff = (rhs - lhs).abs();
    let passed = diff <= TOLERANCE * lhs.abs().max(rhs.abs());
    Check { name, lhs, rhs, slack: 0.0 - diff, passed }
}

/// Checks `E f⁴ ≤ C·E M⁴`, `E M⁴ ≤ 81^d·(E M²)²` and `E M² = E f²` for
/// `f = Φ - AVG`, given the exact fourth moment `ef4`.
pub fn verify_chain(dec: &EsDecomposition, ef4: &Rational, budget: u128) -> Result<BonamiWitness> {
    let (em2, em4) = surrogate_moments(dec, budget)?;
    let ef2 = dec.variance();
    let c = dec.local_fourth_moment_ratio();
    let degree = dec.degree();
    let checks = vec![
        leq("fourth moment vs surrogate", to_f64(ef4), to_f64(&c) * em4),
        leq("surrogate hypercontractivity", em4, 81f64.powi(degree as i32) * em2 * em2),
        equal("surrogate second moment", em2, to_f64(&ef2)),
    ];
    Ok(BonamiWitness {
        z_moments: z_moments(),
        m_coeffs: surrogate_coefficients(dec),
        em2,
        em4,
        ef2,
        ef4: ef4.clone(),
        c,
        degree,
        checks,
    })
}
