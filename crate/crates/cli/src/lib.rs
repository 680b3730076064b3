//! Config-driven experiment runner for `rfk-core`: config parsing, one
//! command per experiment, the acceptance battery and the CSV writer.

// `!(x > 0.0)` is how argument checks reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accept;
pub mod commands;
pub mod config;
pub mod csv;
