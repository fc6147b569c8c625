//! Neighbor-superiority analytics for directed follow graphs.
//!
//! Given a follower/followee graph and a post/repost log, this crate computes
//! per-node activity and influence measures, evaluates the 32 mean/median
//! follower/followee superiority tests over 8 node attributes, and produces
//! the binned distributional reports (histograms, prevalence and percentile
//! curves, degree flow matrix, correlation matrix). A synthetic-graph module
//! provides seeded generators and an independent brute-force oracle for the
//! superiority computations.

pub mod activity;
pub mod graph;
pub mod stats;
pub mod superiority;
pub mod synth;

pub use activity::{CascadeIndex, QualityVector, TweetRecord};
pub use graph::{DirectedGraph, Direction, IdMap, NodeId};
pub use superiority::{Aggregate, AttributeKind, AttributeTable, SuperiorityReport, SuperiorityType};
