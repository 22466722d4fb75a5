//! Scenario-driven front end for the opinionlab toolkit: configuration
//! documents, data export, and the bundled reference recipes.

// Validation uses `!(x > 0.0)` on purpose: the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod recipes;
