//! Command-line front end for `hadamard-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod corpus;

pub use commands::run;
