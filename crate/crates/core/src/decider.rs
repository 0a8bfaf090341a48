//! The decision procedure for `OPT ≥ AVG + t`: a moment certificate,
//! kernelization to the dependency set, exhaustive search of the kernel,
//! and a randomized witness search.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::efron_stein::{decompose_instance, ratio, DependencySet, EsDecomposition};
use crate::error::{Error, Result};
use crate::exact::{pow, rat, Rational, VarId};
use crate::instance::{Constraint, Instance, Ordering};
use crate::perm::next_permutation;

pub const DEFAULT_CAP: usize = 10;
pub const DEFAULT_BUDGET: u64 = 10_000;

/// The exact variance test `σ² ≥ 4·b·t²` with `b = 81^k·C + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateReport {
    pub sigma2: Rational,
    pub c: Rational,
    pub b: Rational,
    pub t: Rational,
    pub fires: bool,
}

impl CertificateReport {
    /// `4·b·t²`, the smallest variance that fires.
    pub fn threshold(&self) -> Rational {
        rat(4, 1) * &self.b * &self.t * &self.t
    }
}

fn require_positive(t: &Rational) -> Result<()> {
    if t.is_positive() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("t must be positive, got {t}")))
    }
}

/// When `fires` holds, `Φ - AVG ≥ t` with positive probability, hence
/// `OPT ≥ AVG + t`.
pub fn certify_above_average(dec: &EsDecomposition, t: &Rational) -> Result<CertificateReport> {
    require_positive(t)?;
    let sigma2 = dec.variance();
    let c = dec.local_fourth_moment_ratio();
    let b = pow(&rat(81, 1), dec.arity() as u32) * &c + Rational::one();
    let fires = sigma2.is_positive() && sigma2 >= rat(4, 1) * &b * t * t;
    Ok(CertificateReport { sigma2, c, b, t: t.clone(), fires })
}

/// The instance restricted to the dependency set `V′`.
///
/// `Φ` does not depend on variables outside `V′`, so the kernel is scored
/// with those variables placed after the kernel in id order. Only
/// constraints touching `V′` change across kernel orderings; the rest
/// contribute the constant folded into `offset`.
#[derive(Clone, Debug)]
pub struct KernelReport {
    pub kernel_vars: DependencySet,
    pub dec: Arc<EsDecomposition>,
    /// `max Φ - AVG` over kernel orderings, once searched.
    pub opt_minus_avg: Option<Rational>,
    /// Best kernel ordering, smallest first; the lexicographically first
    /// among maximizers.
    pub best_ordering: Option<Vec<VarId>>,
    n: usize,
    touching: Vec<Constraint>,
    offset: Rational,
}

impl KernelReport {
    pub fn len(&self) -> usize {
        self.kernel_vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel_vars.is_empty()
    }

    /// Extends a kernel ordering to all variables by appending the rest in
    /// id order.
    pub fn extend(&self, kernel_order: &[VarId]) -> Ordering {
        let mut full = kernel_order.to_vec();
        full.extend((0..self.n as VarId).filter(|&v| !self.kernel_vars.contains(v)));
        Ordering::new(full).expect("kernel order is a permutation of the kernel")
    }

    /// `Σ_{S≠∅} Φ_S` at `x_{order[i]} = -1 + 2(i+1)/(N+1)`.
    pub fn representative_value(&self, order: &[VarId]) -> Result<Rational> {
        let n = order.len();
        let point = |v: VarId| {
            order
                .iter()
                .position(|&w| w == v)
                .map(|i| ratio(2 * (i + 1), n + 1) - Rational::one())
        };
        self.dec.centered_value(point)
    }
}

pub fn kernelize(inst: &Instance, dec: Arc<EsDecomposition>) -> KernelReport {
    let kernel_vars = dec.dependency_set();
    let (touching, rest): (Vec<&Constraint>, Vec<&Constraint>) = inst
        .constraints()
        .iter()
        .partition(|c| c.vars().iter().any(|&v| kernel_vars.contains(v)));
    let mut report = KernelReport {
        kernel_vars,
        dec,
        opt_minus_avg: None,
        best_ordering: None,
        n: inst.num_vars(),
        touching: touching.into_iter().cloned().collect(),
        offset: Rational::zero(),
    };
    let pos = report.extend(report.kernel_vars.as_slice()).positions();
    let outside = rest.iter().filter(|c| c.satisfied_by(&pos)).count();
    report.offset = ratio(outside, 1) - inst.average_value();
    report
}

/// Tries every ordering of the kernel. The maximizer's value is confirmed
/// against the decomposition at its representative point.
pub fn brute_force_kernel(kr: &KernelReport, cap: usize) -> Result<KernelReport> {
    let kv = kr.kernel_vars.as_slice();
    if kv.len() > cap {
        return Err(Error::CapExceeded { what: "kernel variables", size: kv.len(), cap });
    }
    let mut pos = kr.extend(kv).positions();
    let mut order = kv.to_vec();
    let mut best: Option<(usize, Vec<VarId>)> = None;
    loop {
        for (i, &v) in order.iter().enumerate() {
            pos[v as usize] = i;
        }
        let val = kr.touching.iter().filter(|c| c.satisfied_by(&pos)).count();
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, order.clone()));
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    let (count, order) = best.expect("at least one ordering");
    let value = ratio(count, 1) + &kr.offset;
    let check = kr.representative_value(&order)?;
    if check != value {
        return Err(Error::Inconsistent(format!(
            "kernel count gives {value}, decomposition gives {check}"
        )));
    }
    Ok(KernelReport { opt_minus_avg: Some(value), best_ordering: Some(order), ..kr.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    YesCertified,
    YesKernel,
    NoKernel,
    Undecided,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::YesCertified => "yes-certified",
            Outcome::YesKernel => "yes-kernel",
            Outcome::NoKernel => "no-kernel",
            Outcome::Undecided => "undecided",
        }
    }

    pub fn is_yes(self) -> bool {
        matches!(self, Outcome::YesCertified | Outcome::YesKernel)
    }

    pub fn is_decided(self) -> bool {
        self != Outcome::Undecided
    }
}

/// A full ordering with its exact number of satisfied constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub ordering: Ordering,
    pub value: usize,
}

#[derive(Clone, Debug)]
pub struct DecisionReport {
    pub outcome: Outcome,
    pub certificate: CertificateReport,
    pub kernel: Option<KernelReport>,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecideConfig {
    /// Largest kernel searched exhaustively.
    pub cap: usize,
    /// Restarts for the witness search.
    pub budget: u64,
    pub seed: u64,
    /// Search for a witness when the certificate fires.
    pub witness: bool,
}

impl Default for DecideConfig {
    fn default() -> Self {
        DecideConfig { cap: DEFAULT_CAP, budget: DEFAULT_BUDGET, seed: 0, witness: false }
    }
}

pub fn decide(inst: &Instance, t: &Rational, config: &DecideConfig) -> Result<DecisionReport> {
    require_positive(t)?;
    decide_with(inst, Arc::new(decompose_instance(inst)), t, config)
}

/// [`decide`] with a precomputed decomposition of `inst`.
pub fn decide_with(
    inst: &Instance,
    dec: Arc<EsDecomposition>,
    t: &Rational,
    config: &DecideConfig,
) -> Result<DecisionReport> {
    let certificate = certify_above_average(&dec, t)?;
    if certificate.fires {
        let witness = if config.witness {
            find_witness(inst, t, config.budget, config.seed)
                .map(|o| Witness { value: inst.evaluate(&o), ordering: o })
        } else {
            None
        };
        return Ok(DecisionReport { outcome: Outcome::YesCertified, certificate, kernel: None, witness });
    }
    let kernel = kernelize(inst, dec);
    if kernel.len() > config.cap {
        return Ok(DecisionReport {
            outcome: Outcome::Undecided,
            certificate,
            kernel: Some(kernel),
            witness: None,
        });
    }
    let kernel = brute_force_kernel(&kernel, config.cap)?;
    let gap = kernel.opt_minus_avg.as_ref().expect("searched");
    let outcome = if gap >= t { Outcome::YesKernel } else { Outcome::NoKernel };
    let ordering = kernel.extend(kernel.best_ordering.as_ref().expect("searched"));
    let witness = Witness { value: inst.evaluate(&ordering), ordering };
    Ok(DecisionReport { outcome, certificate, kernel: Some(kernel), witness: Some(witness) })
}

/// Random restarts of steepest-ascent hill climbing over adjacent
/// transpositions. Returns the first ordering reaching `AVG + t`.
pub fn find_witness(inst: &Instance, t: &Rational, budget: u64, seed: u64) -> Option<Ordering> {
    let n = inst.num_vars();
    let target = inst.average_value() + t;
    let reaches = |value: usize| ratio(value, 1) >= target;
    // Constraints shared by each pair are found through per-variable lists.
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in inst.constraints().iter().enumerate() {
        for &v in c.vars() {
            incident[v as usize].push(i);
        }
    }
    let cons = inst.constraints();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<VarId> = (0..n as VarId).collect();
    let mut pos = vec![0usize; n];
    for _ in 0..budget {
        order.shuffle(&mut rng);
        for (i, &v) in order.iter().enumerate() {
            pos[v as usize] = i;
        }
        let mut value = inst.evaluate_positions(&pos);
        loop {
            if reaches(value) {
                return Some(Ordering::new(order).expect("permutation"));
            }
            let mut best: Option<(i64, usize)> = None;
            for i in 0..n.saturating_sub(1) {
                let delta = swap_delta(cons, &incident, &mut pos, order[i], order[i + 1]);
                if delta > 0 && best.is_none_or(|(d, _)| delta > d) {
                    best = Some((delta, i));
                }
            }
            let Some((delta, i)) = best else { break };
            order.swap(i, i + 1);
            pos[order[i] as usize] = i;
            pos[order[i + 1] as usize] = i + 1;
            value = (value as i64 + delta) as usize;
        }
    }
    None
}

/// Change in satisfied constraints when adjacent `a` (just before `b`) and
/// `b` trade places. `pos` is restored before returning.
fn swap_delta(cons: &[Constraint], incident: &[Vec<usize>], pos: &mut [usize], a: VarId, b: VarId) -> i64 {
    let (small, other) = if incident[a as usize].len() <= incident[b as usize].len() {
        (a, b)
    } else {
        (b, a)
    };
    let shared: Vec<usize> = incident[small as usize]
        .iter()
        .copied()
        .filter(|&i| cons[i].vars().contains(&other))
        .collect();
    if shared.is_empty() {
        return 0;
    }
    let before = shared.iter().filter(|&&i| cons[i].satisfied_by(pos)).count() as i64;
    pos.swap(a as usize, b as usize);
    let after = shared.iter().filter(|&&i| cons[i].satisfied_by(pos)).count() as i64;
    pos.swap(a as usize, b as usize);
    after - before
}

/// The smallest `m` for which `m` disjoint MAS constraints fire at `t`:
/// `m/4 ≥ 4·(81²·9/5 + 1)·t²`.
pub fn disjoint_mas_threshold(t: &Rational) -> BigInt {
    let b = rat(81 * 81, 1) * rat(9, 5) + Rational::one();
    (rat(16, 1) * b * t * t).ceil().to_integer()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, parse_instance, GenParams, Model};
    use crate::oracle::brute_force_opt;
    use proptest::prelude::*;

    fn tri() -> Instance {
        parse_instance(b"ocsp 1\nnvars 3\ncon 1 2\ncon 2 3\ncon 3 1\n").unwrap()
    }

    fn disjoint_mas(m: usize) -> Instance {
        let cons = (0..m as VarId).map(|i| Constraint::mas(2 * i, 2 * i + 1).unwrap()).collect();
        Instance::new(2 * m, cons).unwrap()
    }

    fn kernel_of(inst: &Instance) -> KernelReport {
        kernelize(inst, Arc::new(decompose_instance(inst)))
    }

    #[test]
    fn certificate_examples() {
        let one = disjoint_mas(1);
        let cert = certify_above_average(&decompose_instance(&one), &rat(1, 1)).unwrap();
        assert_eq!(cert.sigma2, rat(1, 4));
        assert_eq!(cert.c, rat(9, 5));
        assert_eq!(cert.b, rat(81 * 81 * 9, 5) + rat(1, 1));
        assert!(!cert.fires);

        let opposite = Instance::new(
            2,
            vec![Constraint::mas(0, 1).unwrap(), Constraint::mas(1, 0).unwrap()],
        )
        .unwrap();
        let cert = certify_above_average(&decompose_instance(&opposite), &rat(1, 1000)).unwrap();
        assert!(!cert.fires);
        assert!(certify_above_average(&decompose_instance(&one), &rat(0, 1)).is_err());
    }

    #[test]
    fn disjoint_mas_threshold_is_exact() {
        let t = rat(1, 10);
        let m = disjoint_mas_threshold(&t);
        assert_eq!(m, BigInt::from(1890));
        for (m, fires) in [(1889, false), (1890, true)] {
            let cert = certify_above_average(&decompose_instance(&disjoint_mas(m)), &t).unwrap();
            assert_eq!(cert.fires, fires, "m = {m}");
        }
    }

    #[test]
    fn kernelize_examples() {
        let opposite = Instance::new(
            2,
            vec![Constraint::mas(0, 1).unwrap(), Constraint::mas(1, 0).unwrap()],
        )
        .unwrap();
        let k = brute_force_kernel(&kernel_of(&opposite), DEFAULT_CAP).unwrap();
        assert!(k.is_empty());
        assert_eq!(k.opt_minus_avg, Some(rat(0, 1)));

        assert_eq!(kernel_of(&tri()).kernel_vars.as_slice(), &[0, 1, 2]);

        let wide = Instance::new(100, vec![Constraint::mas(41, 7).unwrap()]).unwrap();
        assert_eq!(kernel_of(&wide).kernel_vars.as_slice(), &[7, 41]);
    }

    #[test]
    fn brute_force_kernel_examples() {
        let k = brute_force_kernel(&kernel_of(&tri()), DEFAULT_CAP).unwrap();
        assert_eq!(k.opt_minus_avg, Some(rat(1, 2)));
        assert_eq!(k.best_ordering, Some(vec![0, 1, 2]));

        let k = brute_force_kernel(&kernel_of(&disjoint_mas(1)), DEFAULT_CAP).unwrap();
        assert_eq!(k.opt_minus_avg, Some(rat(1, 2)));

        let k = brute_force_kernel(&kernel_of(&Instance::new(4, vec![]).unwrap()), 0).unwrap();
        assert_eq!(k.opt_minus_avg, Some(rat(0, 1)));

        assert!(matches!(
            brute_force_kernel(&kernel_of(&tri()), 2),
            Err(Error::CapExceeded { size: 3, cap: 2, .. })
        ));
    }

    #[test]
    fn decide_examples() {
        let cfg = DecideConfig::default();
        let r = decide(&tri(), &rat(1, 1), &cfg).unwrap();
        assert_eq!(r.outcome, Outcome::NoKernel);

        let r = decide(&tri(), &rat(1, 2), &cfg).unwrap();
        assert_eq!(r.outcome, Outcome::YesKernel);
        assert_eq!(r.witness.unwrap().value, 2);

        let m = 1890;
        let cfg = DecideConfig { witness: true, budget: 3, ..DecideConfig::default() };
        let r = decide(&disjoint_mas(m), &rat(1, 10), &cfg).unwrap();
        assert_eq!(r.outcome, Outcome::YesCertified);
        assert!(r.kernel.is_none());
        let w = r.witness.unwrap();
        assert!(ratio(w.value, 1) >= ratio(m, 2) + rat(1, 10));

        let r = decide(&disjoint_mas(20), &rat(1_000_000, 1), &DecideConfig::default()).unwrap();
        assert_eq!(r.outcome, Outcome::Undecided);
        assert_eq!(r.kernel.unwrap().len(), 40);
    }

    #[test]
    fn witness_examples() {
        let w = find_witness(&tri(), &rat(1, 2), 100, 7).unwrap();
        assert_eq!(tri().evaluate(&w), 2);
        let opposite = Instance::new(
            2,
            vec![Constraint::mas(0, 1).unwrap(), Constraint::mas(1, 0).unwrap()],
        )
        .unwrap();
        assert_eq!(find_witness(&opposite, &rat(1, 1), 50, 0), None);
        let inst = generate(Model::RandomK, &GenParams { n: 12, m: 30, k: 3, allowed_fraction: 0.3 }, 5)
            .unwrap();
        assert_eq!(
            find_witness(&inst, &rat(3, 1), 20, 9),
            find_witness(&inst, &rat(3, 1), 20, 9)
        );
    }

    #[test]
    fn every_restart_on_the_triangle_reaches_two() {
        for seed in 0..50 {
            let w = find_witness(&tri(), &rat(1, 2), 1, seed).unwrap();
            assert_eq!(tri().evaluate(&w), 2);
        }
    }

    fn small_instance() -> impl Strategy<Value = Instance> {
        (any::<u64>(), 0usize..3, 2usize..=7, 1usize..=6).prop_map(|(seed, model, n, m)| {
            let model = [Model::Mas, Model::Betweenness, Model::RandomK][model];
            let n = n.max(3);
            generate(model, &GenParams { n, m, k: 3, allowed_fraction: 0.4 }, seed).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kernel_value_matches_full_enumeration(inst in small_instance()) {
            let k = brute_force_kernel(&kernel_of(&inst), DEFAULT_CAP).unwrap();
            let (opt, avg) = brute_force_opt(&inst, 8).unwrap();
            prop_assert_eq!(k.opt_minus_avg.unwrap(), ratio(opt, 1) - avg);
        }

        #[test]
        fn value_is_independent_of_the_extension(inst in small_instance(), seed in any::<u64>()) {
            let k = kernel_of(&inst);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order = k.kernel_vars.as_slice().to_vec();
            order.shuffle(&mut rng);
            let first = inst.evaluate(&k.extend(&order));
            // Scatter the kernel, in the same relative order, among the rest.
            let mut mixed: Vec<VarId> = (0..inst.num_vars() as VarId).collect();
            mixed.shuffle(&mut rng);
            let mut kernel_iter = order.iter();
            for v in mixed.iter_mut() {
                if k.kernel_vars.contains(*v) {
                    *v = *kernel_iter.next().unwrap();
                }
            }
            let second = inst.evaluate(&Ordering::new(mixed).unwrap());
            prop_assert_eq!(first, second);
        }

        #[test]
        fn decisions_agree_with_enumeration(inst in small_instance(), ti in 0usize..3) {
            let t = [rat(1, 2), rat(1, 1), rat(2, 1)][ti].clone();
            let r = decide(&inst, &t, &DecideConfig::default()).unwrap();
            let (opt, avg) = brute_force_opt(&inst, 8).unwrap();
            let truth = ratio(opt, 1) >= avg + &t;
            prop_assert!(r.outcome.is_decided());
            prop_assert_eq!(r.outcome.is_yes(), truth);
        }

        #[test]
        fn yes_is_monotone_in_t(inst in small_instance(), num in 1i64..8) {
            let cfg = DecideConfig::default();
            let t = rat(num, 4);
            if decide(&inst, &t, &cfg).unwrap().outcome.is_yes() {
                for smaller in 1..=num {
                    prop_assert!(decide(&inst, &rat(smaller, 4), &cfg).unwrap().outcome.is_yes());
                }
            }
        }

        #[test]
        fn certified_yes_is_sound(inst in small_instance(), scale in 1i64..200) {
            let dec = decompose_instance(&inst);
            let sigma2 = dec.variance();
            if sigma2.is_positive() {
                // Pick t just under the firing threshold to exercise the certificate.
                let b = certify_above_average(&dec, &rat(1, 1)).unwrap().b;
                let t_sq_max = &sigma2 / (rat(4, 1) * &b);
                let t = Rational::new(BigInt::one(), BigInt::from(1000 * scale));
                if &t * &t <= t_sq_max {
                    let cert = certify_above_average(&dec, &t).unwrap();
                    prop_assert!(cert.fires);
                    let (opt, avg) = brute_force_opt(&inst, 8).unwrap();
                    prop_assert!(ratio(opt, 1) >= avg + t);
                }
            }
        }
    }
}
