use thiserror::Error;

use crate::exact::VarId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: variable {var} appears twice in one ordering")]
    DuplicateVariable { line: usize, var: usize },
    #[error("line {line}: variable {var} is out of range 1..={n}")]
    VariableOutOfRange { line: usize, var: usize, n: usize },
    #[error("line {line}: constraint arity {arity} exceeds the maximum {max}")]
    ArityExceeded { line: usize, arity: usize, max: usize },
    #[error("line {line}: permutation listed twice in one constraint")]
    DuplicatePermutation { line: usize },
    #[error("line {line}: orderings of one constraint must use the same variables")]
    MismatchedPermutation { line: usize },
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("invalid rational `{0}`")]
    InvalidRational(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("variable x{} is not assigned", .0 + 1)]
    MissingVariable(VarId),
    #[error("variables x{} and x{} take the same value", .0 + 1, .1 + 1)]
    Tie(VarId, VarId),
    #[error("chain functions have different supports")]
    SupportMismatch,
    #[error("{what}: size {size} exceeds the cap {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("{what}: {needed} units of work exceed the budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },
    #[error("the partial order contains a cycle")]
    CyclicPoset,
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
