//! Chain event graph engine for reliability analysis.

pub mod ceg;
pub mod extraction;
pub mod fixtures;
pub mod global_net;
pub mod graph;
pub mod hierarchy;
pub mod missingness;
pub mod random;
pub mod remedy;
pub mod shell;
pub mod tree;
