//! NEAR: program synthesis by A* search over a typed derivation graph with
//! heuristics from trained neural relaxations.

pub mod autodiff;
pub mod data;
pub mod dsl;
pub mod graph;
pub mod metrics;
pub mod relax;
pub mod search;
pub mod toy;
