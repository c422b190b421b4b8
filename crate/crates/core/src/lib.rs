//! Reference kernels, analytic latency model, design-space search and a
//! swap-timeline simulator for a phase-disaggregated ternary LLM accelerator.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod commands;
pub mod config;
pub mod container;
pub mod dse;
pub mod error;
pub mod perf;
pub mod sim;
pub mod tlmm;

pub use error::{Error, Result};
