//! Similarity-based flexible tree matching for HTML and other labeled trees.
//!
//! The pipeline tokenizes both trees, scores node pairs by shared rare tokens,
//! builds a bipartite graph of candidate pairs and searches it for a low-cost
//! full matching. [`match_trees`] runs every stage with one set of parameters.

pub mod baseline;
pub mod eval;
pub mod graph;
pub mod mutation;
pub mod optimizer;
pub mod params;
mod pipeline;
pub mod similarity;
pub mod tokenize;
pub mod tree;

pub use graph::{MatchGraph, MatchedPair, Matching, matching_cost};
pub use params::SftmParams;
pub use tree::{DomNode, LabeledTree, NodeId};
pub use pipeline::{MatchError, SftmOutcome, StageTimes, match_trees, match_trees_with_deadline};
