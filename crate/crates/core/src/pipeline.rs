use std::time::{Duration, Instant};

use crate::graph::{MatchGraph, Matching};
use crate::optimizer::{OptimizerError, run_metropolis};
use crate::params::{ParamError, SftmParams};
use crate::similarity::{initial_similarity, propagate};
use crate::tree::LabeledTree;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("deadline exceeded")]
    Timeout,
}

/// Wall-clock time spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub similarity: Duration,
    pub graph: Duration,
    pub optimize: Duration,
}

#[derive(Debug, Clone)]
pub struct SftmOutcome {
    pub matching: Matching,
    pub cost: f64,
    pub edge_count: usize,
    pub accepted: usize,
    pub times: StageTimes,
}

/// Matches `t1` against `t2`: similarity, graph, then Metropolis search.
pub fn match_trees(t1: &LabeledTree, t2: &LabeledTree, params: &SftmParams) -> Result<SftmOutcome, MatchError> {
    match_trees_with_deadline(t1, t2, params, None)
}

/// As [`match_trees`], giving up with [`MatchError::Timeout`] once `deadline`
/// passes. The deadline is checked between stages and between iterations.
pub fn match_trees_with_deadline(
    t1: &LabeledTree,
    t2: &LabeledTree,
    params: &SftmParams,
    deadline: Option<Instant>,
) -> Result<SftmOutcome, MatchError> {
    params.validate()?;
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);

    let start = Instant::now();
    let s0 = initial_similarity(t1, t2, params);
    let sp = propagate(&s0, t1, t2, params);
    drop(s0);
    let similarity = start.elapsed();
    if expired() {
        return Err(MatchError::Timeout);
    }

    let start = Instant::now();
    let graph = MatchGraph::build(&sp);
    drop(sp);
    let graph_time = start.elapsed();
    if expired() {
        return Err(MatchError::Timeout);
    }

    let start = Instant::now();
    let outcome = run_metropolis(&graph, params, deadline, |_| {}).map_err(|e| match e {
        OptimizerError::Timeout { .. } => MatchError::Timeout,
        other => unreachable!("optimizer failed on its own graph: {other}"),
    })?;
    Ok(SftmOutcome {
        matching: outcome.best,
        cost: outcome.best_cost,
        edge_count: graph.edge_count(),
        accepted: outcome.accepted,
        times: StageTimes {
            similarity,
            graph: graph_time,
            optimize: start.elapsed(),
        },
    })
}
