//! Simulation and verification lab for invariant Galton-Watson tree measures.

pub mod offspring;
pub mod analytics;
pub mod experiments;
pub mod pruning;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod tree;
