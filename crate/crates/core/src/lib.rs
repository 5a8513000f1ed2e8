//! DAG structure learning from observational data by continuous
//! optimization: concomitant (noise-adaptive) least-squares scores on a
//! log-determinant central path, a method of multipliers for non-negative
//! weights, and the simulation and evaluation pipeline around them.
//!
//! Edge convention: `W[(i, j)] != 0` means `i -> j`. Data matrices are
//! `d × n`, one column per sample.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acyclicity;
pub mod cli;
pub mod colide;
pub mod error;
pub mod graphs;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod nomad;
pub mod scores;
pub mod semsim;

pub use error::{Error, Result};
