//! Shrinkage estimation for stratified Poisson count data.
//!
//! The library models count data observed at several aggregation levels of a
//! hierarchy (city counts plus a county total, counties plus a state total,
//! and so on), where every node carries an independent Poisson draw whose
//! mean is the sum of the leaf rates below it. It provides
//!
//! - the hierarchy itself: parameter trees, observation designs `X(D')`, and
//!   seeded sampling ([`hierarchy`]),
//! - improper conjugate priors on the (total, ratio) parametrization,
//!   including the Jeffreys family, validated against a numeric Fisher
//!   information oracle ([`priors`]),
//! - every closed-form generalized Bayes estimator for the basic, multi-set,
//!   and general hierarchical models, plus a generic conjugate engine
//!   ([`estimators`]),
//! - standardized squared error, entropy, and multi-level entropy losses with
//!   their predictive-density counterparts ([`losses`]),
//! - risk evaluation: exact truncated-series oracles, paired Monte Carlo with
//!   common random numbers, the Hudson identity checker, Bayes-risk
//!   integrals, and the Blyth admissibility diagnostic ([`risk`]),
//! - JSON-configured experiment runners behind the `stratshrink` CLI
//!   ([`cli`]).

// `!(x > 0.0)`-style guards are used throughout: unlike `x <= 0.0` they
// reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// tree sweeps index parallel per-level tables by node coordinates
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod hierarchy;
pub mod losses;
pub mod poisson;
pub mod priors;
pub mod quadrature;
pub mod risk;

pub use error::{Error, Result};
