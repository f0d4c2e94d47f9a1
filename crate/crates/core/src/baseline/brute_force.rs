use super::BaselineError;
use crate::graph::{MatchGraph, MatchedPair, Matching, Side};
use crate::tree::NodeId;

/// Largest `|T1| + |T2|` accepted by [`brute_force_matching`].
pub const BRUTE_FORCE_LIMIT: usize = 16;

type Pairs = Vec<(NodeId, NodeId, f64)>;

struct Search<'g> {
    graph: &'g MatchGraph,
    no_match_cost: f64,
    used: Vec<bool>,
    chosen: Pairs,
    best: Option<(f64, Pairs)>,
}

impl Search<'_> {
    fn visit(&mut self, n: usize, paired: f64) {
        let g = self.graph;
        if n == g.t1_size() {
            let unmatched = g.t1_size() + g.t2_size() - 2 * self.chosen.len();
            let cost = paired + self.no_match_cost * unmatched as f64;
            let better = match &self.best {
                None => true,
                Some((best, pairs)) => {
                    cost < *best || (cost == *best && key(&self.chosen) < key(pairs))
                }
            };
            if better {
                self.best = Some((cost, self.chosen.clone()));
            }
            return;
        }
        self.visit(n + 1, paired);
        let node = NodeId::from_index(n);
        for &id in g.incident(Side::Source, node) {
            let e = *g.edge(id);
            if self.used[e.m.index()] {
                continue;
            }
            self.used[e.m.index()] = true;
            self.chosen.push((e.n, e.m, e.cost));
            self.visit(n + 1, paired + e.cost);
            self.chosen.pop();
            self.used[e.m.index()] = false;
        }
    }
}

fn key(pairs: &[(NodeId, NodeId, f64)]) -> Vec<(NodeId, NodeId)> {
    pairs.iter().map(|&(n, m, _)| (n, m)).collect()
}

/// Exact minimum-cost full matching by exhaustive enumeration. Ties go to the
/// lexicographically smallest pair list.
pub fn brute_force_matching(g: &MatchGraph, no_match_cost: f64) -> Result<Matching, BaselineError> {
    let nodes = g.t1_size() + g.t2_size();
    if nodes > BRUTE_FORCE_LIMIT {
        return Err(BaselineError::TooLarge {
            nodes,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut search = Search {
        graph: g,
        no_match_cost,
        used: vec![false; g.t2_size()],
        chosen: Vec::new(),
        best: None,
    };
    search.visit(0, 0.0);
    let (_, pairs) = search.best.expect("the empty matching is always a candidate");
    let pairs = pairs
        .into_iter()
        .map(|(n, m, cost)| MatchedPair { n, m, cost })
        .collect();
    Ok(Matching::from_pairs(pairs, g.t1_size(), g.t2_size()).expect("search keeps pairs disjoint"))
}
