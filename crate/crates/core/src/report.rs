//! JSON report shapes. Rationals are strings such as `"3/2"`; variables are
//! 1-based as in the text format. Field order is fixed, so equal inputs give
//! byte-identical output.

use serde::Serialize;

use crate::bonami::BonamiWitness;
use crate::chain::VarSet;
use crate::decider::{CertificateReport, DecisionReport, KernelReport, Witness};
use crate::efron_stein::EsDecomposition;
use crate::exact::{Rational, VarId};
use crate::instance::Instance;

fn q(r: &Rational) -> String {
    r.to_string()
}

fn ids(vars: impl IntoIterator<Item = VarId>) -> Vec<u32> {
    vars.into_iter().map(|v| v + 1).collect()
}

/// Pretty JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct CertificateJson {
    pub sigma2: String,
    #[serde(rename = "C")]
    pub c: String,
    pub b: String,
    pub t: String,
    pub threshold: String,
    pub fires: bool,
}

impl From<&CertificateReport> for CertificateJson {
    fn from(c: &CertificateReport) -> Self {
        CertificateJson {
            sigma2: q(&c.sigma2),
            c: q(&c.c),
            b: q(&c.b),
            t: q(&c.t),
            threshold: q(&c.threshold()),
            fires: c.fires,
        }
    }
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct KernelJson {
    pub kernel_vars: Vec<u32>,
    pub size: usize,
    pub num_parts: usize,
    pub opt_minus_avg: Option<String>,
    pub best_ordering: Option<Vec<u32>>,
}

impl From<&KernelReport> for KernelJson {
    fn from(k: &KernelReport) -> Self {
        KernelJson {
            kernel_vars: ids(k.kernel_vars.as_slice().iter().copied()),
            size: k.len(),
            num_parts: k.dec.num_parts(),
            opt_minus_avg: k.opt_minus_avg.as_ref().map(q),
            best_ordering: k.best_ordering.as_ref().map(|o| ids(o.iter().copied())),
        }
    }
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct WitnessJson {
    pub ordering: Vec<u32>,
    pub value: usize,
}

impl From<&Witness> for WitnessJson {
    fn from(w: &Witness) -> Self {
        WitnessJson { ordering: ids(w.ordering.as_slice().iter().copied()), value: w.value }
    }
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct DecisionJson {
    pub outcome: &'static str,
    pub certificate: CertificateJson,
    pub kernel: Option<KernelJson>,
    pub witness: Option<WitnessJson>,
}

impl From<&DecisionReport> for DecisionJson {
    fn from(r: &DecisionReport) -> Self {
        DecisionJson {
            outcome: r.outcome.as_str(),
            certificate: (&r.certificate).into(),
            kernel: r.kernel.as_ref().map(Into::into),
            witness: r.witness.as_ref().map(Into::into),
        }
    }
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct PieceJson {
    pub cell: Vec<u32>,
    pub poly: String,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct PartJson {
    pub vars: Vec<u32>,
    pub cells: usize,
    pub m2: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m4: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceJson>>,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct AnalyzeJson {
    pub num_vars: usize,
    pub num_constraints: usize,
    pub arity: usize,
    pub mean: String,
    pub degree: usize,
    pub variance: String,
    pub dependency_set_size: usize,
    #[serde(rename = "C")]
    pub c: String,
    pub min_part_variance: Option<String>,
    pub parts: Vec<PartJson>,
}

impl AnalyzeJson {
    pub fn new(inst: &Instance, dec: &EsDecomposition, m4: bool, pieces: bool) -> Self {
        let fourth = dec.fourth_moments();
        let parts = dec
            .parts()
            .map(|(s, f)| PartJson {
                vars: ids(s.iter()),
                cells: f.num_cells(),
                m2: q(&dec.second_moments()[s]),
                m4: m4.then(|| q(&fourth[s])),
                pieces: pieces.then(|| {
                    f.render_pieces()
                        .into_iter()
                        .map(|(cell, poly)| PieceJson { cell, poly })
                        .collect()
                }),
            })
            .collect();
        AnalyzeJson {
            num_vars: inst.num_vars(),
            num_constraints: inst.constraints().len(),
            arity: dec.arity(),
            mean: q(dec.mean()),
            degree: dec.degree(),
            variance: q(&dec.variance()),
            dependency_set_size: dec.dependency_set().len(),
            c: q(&dec.local_fourth_moment_ratio()),
            min_part_variance: dec.min_part_variance().map(q),
            parts,
        }
    }
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct OracleJson {
    pub opt: usize,
    pub avg: String,
    pub moment2: Option<String>,
    pub moment4: Option<String>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct CoefficientJson {
    pub vars: Vec<u32>,
    pub m: f64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct CheckJson {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct BonamiJson {
    /// `E[Z^m]` for `m = 1..=4`.
    pub z_moments: Vec<String>,
    pub m_coeffs: Vec<CoefficientJson>,
    pub em2: f64,
    pub em4: f64,
    pub ef2: String,
    pub ef4: String,
    #[serde(rename = "C")]
    pub c: String,
    pub degree: usize,
    pub checks: Vec<CheckJson>,
    pub passed: bool,
}

impl From<&BonamiWitness> for BonamiJson {
    fn from(w: &BonamiWitness) -> Self {
        BonamiJson {
            z_moments: w.z_moments.iter().map(q).collect(),
            m_coeffs: w
                .m_coeffs
                .iter()
                .map(|(s, m): &(VarSet, f64)| CoefficientJson { vars: ids(s.iter()), m: *m })
                .collect(),
            em2: w.em2,
            em4: w.em4,
            ef2: q(&w.ef2),
            ef4: q(&w.ef4),
            c: q(&w.c),
            degree: w.degree,
            checks: w
                .checks
                .iter()
                .map(|c| CheckJson { name: c.name, lhs: c.lhs, rhs: c.rhs, slack: c.slack, passed: c.passed })
                .collect(),
            passed: w.passed(),
        }
    }
}
