//! Gaussian entanglement in hybrid optomechanical nodes and its swapping.
//!
//! A node is a cavity whose field couples to a movable mirror and to the
//! Bogoliubov mode of a condensate. [`node`] builds the linearized dynamics,
//! [`spectral`] turns them into the state of mirror, condensate and a filtered
//! output mode, and [`swap`] conditions two such nodes on a Bell measurement of
//! their outputs. [`gaussian`] holds the covariance-matrix algebra underneath.
//! The guide in `book/` walks through each step.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod linalg;
pub mod node;
pub mod quadrature;
pub mod random;
pub mod spectral;
pub mod swap;

pub use error::{Error, Result};

// The guide's snippets run as doctests so that they cannot drift from the API.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/gaussian-states.md")]
    mod gaussian_states {}
    #[doc = include_str!("../../../book/src/node-model.md")]
    mod node_model {}
    #[doc = include_str!("../../../book/src/filtered-modes.md")]
    mod filtered_modes {}
    #[doc = include_str!("../../../book/src/swapping.md")]
    mod swapping {}
}
