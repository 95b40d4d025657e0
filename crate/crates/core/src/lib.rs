//! Finite-precision p-adic toolkit for analytic coefficient modules, branching
//! evaluators and slope decompositions of compact operators.

pub mod padic;
pub mod series;
pub mod weights;
pub mod matrix;
pub mod slope;
pub mod coeff;
pub mod branching;
pub mod oms;
pub mod suites;
