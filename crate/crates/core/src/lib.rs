//! Proper composite losses, exp-concavifying links, characterization checks,
//! surrogate losses and the Aggregating Algorithm.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bregman;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod links;
pub mod losses;
pub mod numeric;
pub mod simplex;

pub use error::{Error, Result};
