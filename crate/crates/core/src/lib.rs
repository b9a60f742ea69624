//! Traffic-aware routing over road networks.
//!
//! Three ways of answering a route query are implemented side by side:
//! an all-pairs distance lookup ([`apsp`]), single-query search with optional
//! heuristics ([`search`]), and K-shortest-path preselection re-ranked under
//! live traffic ([`ksp`]). [`bench`] runs them against each other on sampled
//! traffic scenarios and [`stats`] tests the cost differences.

pub mod apsp;
pub mod artifact;
pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod geo;
pub mod graph;
pub mod ksp;
pub mod report;
pub mod search;
pub mod stats;
pub mod synth;
pub mod traffic;

pub use error::{Error, Result};
pub use graph::{NodeId, RoadGraph};
