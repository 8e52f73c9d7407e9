//! Federated differential-privacy sandbox.
//!
//! Simulates a federation of edge nodes holding shards of a tabular dataset
//! and runs two tasks under three protection scenarios:
//!
//! * a Welch t-test on one column, from per-node partial statistics
//!   ([`fedstats`]);
//! * logistic regression trained with DP-SGD ([`fedlearn`]).
//!
//! Scenario 1 is centralized processing with DP on the final result,
//! scenario 2 plaintext aggregation with each node adding local noise, and
//! scenario 3 secure aggregation ([`secagg`]) with DP calibrated to the whole
//! federation. The [`harness`] sweeps ε and the federation size, estimates
//! critical ε values and writes tables and SVG figures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod fedlearn;
pub mod fedstats;
pub mod harness;
pub mod mech;
pub mod par;
pub mod rdp;
pub mod secagg;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
