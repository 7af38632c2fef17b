//! Experiment harness and command implementations behind the `jdr`
//! binary, exposed as a library so tests can drive them directly.

pub mod commands;
pub mod dyadic;
pub mod harness;
pub mod pathology;
pub mod plan;
