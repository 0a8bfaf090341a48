//! Exact scalar and polynomial arithmetic.
//!
//! Everything on the certificate path is computed here with arbitrary
//! precision rationals; no floating point is involved.

mod poly;
mod rational;

pub use poly::{Bound, Monomial, Polynomial, VarId};
pub use rational::{factorial, parse_rational, pow, rat, serde_rational, Rational};
