//! Fixed points of stochastic recursive-utility operators on unbounded Markov
//! state spaces: models, function spaces, operators and solvers.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod function_space;
pub mod linalg;
pub mod models;
pub mod numerics;
pub mod operators;
pub mod preferences;
pub mod quadrature;
pub mod solvers;
