//! Configuration-driven experiment runner for the hybrid-swap library.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod emit;
pub mod error;
pub mod run;

pub use config::Config;
pub use error::CliError;
pub use run::{run, Command, RunRecord};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/running-experiments.md")]
mod guide {}
