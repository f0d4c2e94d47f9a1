//! Metropolis search for a low-cost full matching.
//!
//! Edge costs are fixed once the graph is built, so a suggestion is a single
//! walk over the cost-sorted edge list: keep a random prefix of the current
//! matching, then repeatedly pick from the cheapest remaining edges and prune
//! everything incident to the picked endpoints.
//!
//! Random draws happen in a fixed order per iteration: the kept-prefix length,
//! one Bernoulli(γ) per scanned edge (skipped when γ is 0 or 1), then one
//! uniform acceptance draw when the proposal is worse than the current sample.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeId, MatchGraph, MatchedPair, Matching, Side};
use crate::params::SftmParams;

/// The optimizer's pseudo-random generator.
pub type SftmRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SftmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizerError {
    #[error("objective is undefined for a matching with no edges")]
    EmptyMatching,
    #[error("a pair of the matching is not an edge of the graph")]
    ForeignPair,
    #[error("deadline exceeded after {iterations} iterations")]
    Timeout { iterations: usize },
}

/// Remaining-edge list over the sorted edges, with O(1) unlink.
struct Suggester<'g> {
    graph: &'g MatchGraph,
    next: Vec<u32>,
    prev: Vec<u32>,
    alive: Vec<bool>,
    next_init: Vec<u32>,
    prev_init: Vec<u32>,
}

impl<'g> Suggester<'g> {
    fn new(graph: &'g MatchGraph) -> Self {
        let e = graph.edge_count() as u32;
        // Slot `e` is the sentinel; next[e] is the head, prev[e] the tail.
        let next_init: Vec<u32> = (1..=e).chain(std::iter::once(0)).collect();
        let prev_init: Vec<u32> = std::iter::once(e).chain(0..e).collect();
        Suggester {
            graph,
            next: next_init.clone(),
            prev: prev_init.clone(),
            alive: vec![true; e as usize],
            next_init,
            prev_init,
        }
    }

    #[inline]
    fn sentinel(&self) -> u32 {
        self.alive.len() as u32
    }

    fn reset(&mut self) {
        self.next.copy_from_slice(&self.next_init);
        self.prev.copy_from_slice(&self.prev_init);
        self.alive.fill(true);
    }

    #[inline]
    fn unlink(&mut self, id: EdgeId) {
        let i = id as usize;
        if !self.alive[i] {
            return;
        }
        self.alive[i] = false;
        let (p, n) = (self.prev[i], self.next[i]);
        self.next[p as usize] = n;
        self.prev[n as usize] = p;
    }

    /// Removes every edge sharing an endpoint with `id`, including `id`.
    fn prune(&mut self, id: EdgeId) {
        let edge = *self.graph.edge(id);
        let graph = self.graph;
        for &x in graph.incident(Side::Source, edge.n) {
            self.unlink(x);
        }
        for &x in graph.incident(Side::Target, edge.m) {
            self.unlink(x);
        }
    }

    fn suggest(&mut self, current: &[EdgeId], gamma: f64, rng: &mut SftmRng) -> Vec<EdgeId> {
        self.reset();
        let keep = rng.random_range(0..=current.len());
        let mut out = Vec::with_capacity(current.len().max(16));
        for &id in &current[..keep] {
            out.push(id);
            self.prune(id);
        }
        self.complete(&mut out, gamma, rng);
        out
    }

    fn complete(&mut self, out: &mut Vec<EdgeId>, gamma: f64, rng: &mut SftmRng) {
        let sentinel = self.sentinel();
        while self.next[sentinel as usize] != sentinel {
            let mut cursor = self.next[sentinel as usize];
            if gamma < 1.0 {
                loop {
                    if gamma > 0.0 && rng.random_bool(gamma) {
                        break;
                    }
                    let after = self.next[cursor as usize];
                    if after == sentinel {
                        // Scan exhausted: fall back to the last remaining edge.
                        break;
                    }
                    cursor = after;
                }
            }
            out.push(cursor);
            self.prune(cursor);
        }
    }

    fn greedy(&mut self) -> Vec<EdgeId> {
        self.reset();
        let mut out = Vec::new();
        let mut rng = rng_from_seed(0);
        self.complete(&mut out, 1.0, &mut rng);
        out
    }
}

fn selection_cost(graph: &MatchGraph, edges: &[EdgeId], no_match_cost: f64) -> f64 {
    let paired: f64 = edges.iter().map(|&id| graph.edge(id).cost).sum();
    let unmatched = graph.t1_size() + graph.t2_size() - 2 * edges.len();
    paired + no_match_cost * unmatched as f64
}

/// `|M|` counting pairs and no-match assignments.
fn selection_len(graph: &MatchGraph, edges: &[EdgeId]) -> usize {
    graph.t1_size() + graph.t2_size() - edges.len()
}

fn to_matching(graph: &MatchGraph, edges: &[EdgeId]) -> Matching {
    let pairs = edges
        .iter()
        .map(|&id| {
            let e = graph.edge(id);
            MatchedPair {
                n: e.n,
                m: e.m,
                cost: e.cost,
            }
        })
        .collect();
    Matching::from_pairs(pairs, graph.t1_size(), graph.t2_size())
        .expect("optimizer selections are always disjoint")
}

fn to_selection(graph: &MatchGraph, m: &Matching) -> Result<Vec<EdgeId>, OptimizerError> {
    m.pairs()
        .iter()
        .map(|p| graph.find_edge(p.n, p.m).ok_or(OptimizerError::ForeignPair))
        .collect()
}

/// Greedy start: take edges cheapest-first whenever both endpoints are free.
pub fn initial_matching(g: &MatchGraph) -> Matching {
    to_matching(g, &Suggester::new(g).greedy())
}

/// One proposal step from `m_t`. Pairs of `m_t` are kept in stored order.
pub fn suggest_matching(
    g: &MatchGraph,
    m_t: &Matching,
    params: &SftmParams,
    rng: &mut SftmRng,
) -> Result<Matching, OptimizerError> {
    let current = to_selection(g, m_t)?;
    let mut suggester = Suggester::new(g);
    Ok(to_matching(g, &suggester.suggest(&current, params.gamma, rng)))
}

/// `exp(-β · c(M) / |M|)` where `|M|` counts pairs and no-match assignments.
pub fn objective(m: &Matching, params: &SftmParams) -> Result<f64, OptimizerError> {
    let len = m.edge_len();
    if len == 0 {
        return Err(OptimizerError::EmptyMatching);
    }
    let cost = crate::graph::raw_cost(m, params.no_match_cost);
    Ok((-params.beta * cost / len as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub current_cost: f64,
    pub best_cost: f64,
    pub accepted: bool,
}

/// Random-walk state over full matchings.
pub struct MetropolisState<'g> {
    graph: &'g MatchGraph,
    suggester: Suggester<'g>,
    beta: f64,
    gamma: f64,
    no_match_cost: f64,
    current: Vec<EdgeId>,
    current_cost: f64,
    best: Vec<EdgeId>,
    best_cost: f64,
    rng: SftmRng,
    pub accepted_count: usize,
    pub iteration: usize,
}

impl<'g> MetropolisState<'g> {
    /// Starts from the greedy matching.
    pub fn new(graph: &'g MatchGraph, params: &SftmParams) -> Self {
        let mut suggester = Suggester::new(graph);
        let current = suggester.greedy();
        let current_cost = selection_cost(graph, &current, params.no_match_cost);
        MetropolisState {
            graph,
            suggester,
            beta: params.beta,
            gamma: params.gamma,
            no_match_cost: params.no_match_cost,
            best: current.clone(),
            best_cost: current_cost,
            current,
            current_cost,
            rng: rng_from_seed(params.seed),
            accepted_count: 0,
            iteration: 0,
        }
    }

    pub fn step(&mut self) -> Progress {
        let proposal = self.suggester.suggest(&self.current, self.gamma, &mut self.rng);
        if cfg!(debug_assertions) {
            to_matching(self.graph, &proposal)
                .check_full()
                .expect("suggestions are full matchings");
        }
        let cost = selection_cost(self.graph, &proposal, self.no_match_cost);
        let mean_new = cost / selection_len(self.graph, &proposal).max(1) as f64;
        let mean_cur = self.current_cost / selection_len(self.graph, &self.current).max(1) as f64;
        let log_ratio = -self.beta * (mean_new - mean_cur);
        let accepted = log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp();

        if cost < self.best_cost {
            self.best_cost = cost;
            self.best.clone_from(&proposal);
        }
        if accepted {
            self.current = proposal;
            self.current_cost = cost;
            self.accepted_count += 1;
        }
        self.iteration += 1;
        Progress {
            iteration: self.iteration,
            current_cost: self.current_cost,
            best_cost: self.best_cost,
            accepted,
        }
    }

    pub fn current_cost(&self) -> f64 {
        self.current_cost
    }

    pub fn best_cost(&self) -> f64 {
        self.best_cost
    }

    pub fn current_matching(&self) -> Matching {
        to_matching(self.graph, &self.current)
    }

    pub fn best_matching(&self) -> Matching {
        to_matching(self.graph, &self.best)
    }
}

#[derive(Debug, Clone)]
pub struct MetropolisOutcome {
    pub best: Matching,
    pub best_cost: f64,
    pub accepted: usize,
    pub iterations: usize,
}

/// Runs `params.iterations` steps, reporting each through `hook`. Fails with
/// [`OptimizerError::Timeout`] once `deadline` has passed.
pub fn run_metropolis(
    g: &MatchGraph,
    params: &SftmParams,
    deadline: Option<Instant>,
    mut hook: impl FnMut(&Progress),
) -> Result<MetropolisOutcome, OptimizerError> {
    let mut state = MetropolisState::new(g, params);
    for _ in 0..params.iterations {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(OptimizerError::Timeout {
                iterations: state.iteration,
            });
        }
        hook(&state.step());
    }
    Ok(MetropolisOutcome {
        best: state.best_matching(),
        best_cost: state.best_cost,
        accepted: state.accepted_count,
        iterations: state.iteration,
    })
}

/// Best full matching found in `params.iterations` Metropolis steps.
pub fn metropolis(g: &MatchGraph, params: &SftmParams) -> Matching {
    run_metropolis(g, params, None, |_| {})
        .expect("no deadline set")
        .best
}
