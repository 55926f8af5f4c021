//! JSON-configured experiment runners behind the `stratshrink` binary:
//! every theorem's claim reproduced at desk scale, with CSV tables and SVG
//! plots as output and the exit status reporting whether every claim held.

pub mod conditions;
pub mod config;
pub mod csvout;
pub mod runners;
pub mod svg;

pub use conditions::{ConditionCheck, ConditionReport};
pub use runners::{ClaimCheck, ExperimentReport};
