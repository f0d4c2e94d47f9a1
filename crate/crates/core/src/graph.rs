//! The sparse bipartite candidate graph and full matchings over it.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::similarity::SimilarityTable;
use crate::tree::{LabeledTree, NodeId};

/// Index into [`MatchGraph::edges`].
pub type EdgeId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub n: NodeId,
    pub m: NodeId,
    /// `1 / (1 + Sp(n, m))`, in `(0, 1)`.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Nodes of `T1`.
    Source,
    /// Nodes of `T2`.
    Target,
}

#[derive(Debug, Clone)]
pub struct MatchGraph {
    edges: Vec<Edge>,
    source_adj: Vec<Vec<EdgeId>>,
    target_adj: Vec<Vec<EdgeId>>,
}

impl MatchGraph {
    /// One edge per positive entry of `sp`, sorted by `(cost, n, m)`.
    pub fn build(sp: &SimilarityTable) -> Self {
        let mut edges: Vec<Edge> = sp
            .iter()
            .filter(|&(_, _, s)| s > 0.0)
            .map(|(n, m, s)| Edge {
                n,
                m,
                cost: 1.0 / (1.0 + s),
            })
            .collect();
        edges.sort_by(|a, b| {
            a.cost
                .total_cmp(&b.cost)
                .then(a.n.cmp(&b.n))
                .then(a.m.cmp(&b.m))
        });
        Self::from_sorted_edges(edges, sp.t1_size(), sp.t2_size())
    }

    /// Builds a graph from explicit edges (sorted here). Duplicate pairs are rejected.
    pub fn from_edges(mut edges: Vec<Edge>, t1_size: usize, t2_size: usize) -> Self {
        edges.sort_by(|a, b| {
            a.cost
                .total_cmp(&b.cost)
                .then(a.n.cmp(&b.n))
                .then(a.m.cmp(&b.m))
        });
        let mut seen = HashSet::new();
        for e in &edges {
            assert!(seen.insert((e.n, e.m)), "duplicate edge {:?}", (e.n, e.m));
            assert!(e.cost > 0.0 && e.cost.is_finite(), "edge cost must be positive");
        }
        Self::from_sorted_edges(edges, t1_size, t2_size)
    }

    fn from_sorted_edges(edges: Vec<Edge>, t1_size: usize, t2_size: usize) -> Self {
        let mut source_adj = vec![Vec::new(); t1_size];
        let mut target_adj = vec![Vec::new(); t2_size];
        for (i, e) in edges.iter().enumerate() {
            let id = EdgeId::try_from(i).expect("edge count exceeds u32 range");
            source_adj[e.n.index()].push(id);
            target_adj[e.m.index()].push(id);
        }
        MatchGraph {
            edges,
            source_adj,
            target_adj,
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn t1_size(&self) -> usize {
        self.source_adj.len()
    }

    pub fn t2_size(&self) -> usize {
        self.target_adj.len()
    }

    /// Ids of the edges incident to `node`, cheapest first. Unknown nodes have none.
    pub fn incident(&self, side: Side, node: NodeId) -> &[EdgeId] {
        let adj = match side {
            Side::Source => &self.source_adj,
            Side::Target => &self.target_adj,
        };
        adj.get(node.index()).map_or(&[], Vec::as_slice)
    }

    /// Edges incident to `node`, cheapest first.
    pub fn neighbors(&self, side: Side, node: NodeId) -> Vec<Edge> {
        self.incident(side, node)
            .iter()
            .map(|&id| self.edges[id as usize])
            .collect()
    }

    pub fn find_edge(&self, n: NodeId, m: NodeId) -> Option<EdgeId> {
        self.incident(Side::Source, n)
            .iter()
            .copied()
            .find(|&id| self.edges[id as usize].m == m)
    }
}

pub fn build_graph(sp: &SimilarityTable) -> MatchGraph {
    MatchGraph::build(sp)
}

pub fn edge_count(g: &MatchGraph) -> usize {
    g.edge_count()
}

pub fn neighbors(g: &MatchGraph, side: Side, node: NodeId) -> Vec<Edge> {
    g.neighbors(side, node)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub n: NodeId,
    pub m: NodeId,
    pub cost: f64,
}

/// A full matching: every node of either tree is in exactly one pair or in
/// its side's unmatched set (i.e. matched to the no-match node).
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pairs: Vec<MatchedPair>,
    unmatched_t1: Vec<NodeId>,
    unmatched_t2: Vec<NodeId>,
    t1_size: usize,
    t2_size: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchingError {
    #[error("matching is not full: {0}")]
    NotFull(String),
    #[error("pair {n} -> {m} has no edge in the graph")]
    MissingEdge { n: NodeId, m: NodeId },
}

impl Matching {
    /// Builds a matching from pairs; every node not in a pair becomes unmatched.
    /// Fails if a node appears in two pairs or an id is out of range.
    pub fn from_pairs(
        pairs: Vec<MatchedPair>,
        t1_size: usize,
        t2_size: usize,
    ) -> Result<Self, MatchingError> {
        let mut used1 = vec![false; t1_size];
        let mut used2 = vec![false; t2_size];
        for p in &pairs {
            let (i, j) = (p.n.index(), p.m.index());
            if i >= t1_size || j >= t2_size {
                return Err(MatchingError::NotFull(format!("pair {} -> {} out of range", p.n, p.m)));
            }
            if std::mem::replace(&mut used1[i], true) {
                return Err(MatchingError::NotFull(format!("T1 node {} matched twice", p.n)));
            }
            if std::mem::replace(&mut used2[j], true) {
                return Err(MatchingError::NotFull(format!("T2 node {} matched twice", p.m)));
            }
        }
        let free = |used: &[bool]| {
            used.iter()
                .enumerate()
                .filter(|(_, u)| !**u)
                .map(|(i, _)| NodeId::from_index(i))
                .collect()
        };
        Ok(Matching {
            unmatched_t1: free(&used1),
            unmatched_t2: free(&used2),
            pairs,
            t1_size,
            t2_size,
        })
    }

    pub fn empty(t1_size: usize, t2_size: usize) -> Self {
        Self::from_pairs(Vec::new(), t1_size, t2_size).expect("empty matching is full")
    }

    /// Assembles a matching from raw parts without normalizing; use
    /// [`Matching::check_full`] to validate.
    pub fn from_parts(
        pairs: Vec<MatchedPair>,
        unmatched_t1: Vec<NodeId>,
        unmatched_t2: Vec<NodeId>,
        t1_size: usize,
        t2_size: usize,
    ) -> Self {
        Matching {
            pairs,
            unmatched_t1,
            unmatched_t2,
            t1_size,
            t2_size,
        }
    }

    /// Pairs in the order they were selected.
    pub fn pairs(&self) -> &[MatchedPair] {
        &self.pairs
    }

    pub fn unmatched_t1(&self) -> &[NodeId] {
        &self.unmatched_t1
    }

    pub fn unmatched_t2(&self) -> &[NodeId] {
        &self.unmatched_t2
    }

    pub fn t1_size(&self) -> usize {
        self.t1_size
    }

    pub fn t2_size(&self) -> usize {
        self.t2_size
    }

    /// Number of matching edges, including those to no-match nodes.
    pub fn edge_len(&self) -> usize {
        self.pairs.len() + self.unmatched_t1.len() + self.unmatched_t2.len()
    }

    /// Partner of every `T1` node, indexed by `T1` id.
    pub fn partner_map(&self) -> Vec<Option<NodeId>> {
        let mut map = vec![None; self.t1_size];
        for p in &self.pairs {
            map[p.n.index()] = Some(p.m);
        }
        map
    }

    pub fn check_full(&self) -> Result<(), MatchingError> {
        let mut cover1 = vec![0u32; self.t1_size];
        let mut cover2 = vec![0u32; self.t2_size];
        let bump = |cover: &mut [u32], id: NodeId, side: &str| -> Result<(), MatchingError> {
            let slot = cover
                .get_mut(id.index())
                .ok_or_else(|| MatchingError::NotFull(format!("{side} node {id} out of range")))?;
            *slot += 1;
            Ok(())
        };
        for p in &self.pairs {
            bump(&mut cover1, p.n, "T1")?;
            bump(&mut cover2, p.m, "T2")?;
        }
        for &n in &self.unmatched_t1 {
            bump(&mut cover1, n, "T1")?;
        }
        for &m in &self.unmatched_t2 {
            bump(&mut cover2, m, "T2")?;
        }
        for (side, cover) in [("T1", &cover1), ("T2", &cover2)] {
            if let Some(i) = cover.iter().position(|&c| c != 1) {
                return Err(MatchingError::NotFull(format!(
                    "{side} node #{i} covered {} times",
                    cover[i]
                )));
            }
        }
        Ok(())
    }

    /// Checks that every pair is an edge of `g` carrying the same cost.
    pub fn check_edges(&self, g: &MatchGraph) -> Result<(), MatchingError> {
        for p in &self.pairs {
            match g.find_edge(p.n, p.m) {
                Some(id) if g.edge(id).cost == p.cost => {}
                _ => return Err(MatchingError::MissingEdge { n: p.n, m: p.m }),
            }
        }
        Ok(())
    }

    pub fn to_json(&self, t1: &LabeledTree, t2: &LabeledTree) -> MatchingJson {
        MatchingJson {
            pairs: self
                .pairs
                .iter()
                .map(|p| PairJson {
                    t1_xpath: t1.node(p.n).xpath.clone(),
                    t2_xpath: t2.node(p.m).xpath.clone(),
                    cost: p.cost,
                })
                .collect(),
            unmatched_t1: self.unmatched_t1.iter().map(|&n| t1.node(n).xpath.clone()).collect(),
            unmatched_t2: self.unmatched_t2.iter().map(|&m| t2.node(m).xpath.clone()).collect(),
        }
    }
}

/// `Σ pair costs + no_match_cost · (|unmatched_t1| + |unmatched_t2|)`.
pub fn matching_cost(m: &Matching, no_match_cost: f64) -> Result<f64, MatchingError> {
    m.check_full()?;
    Ok(raw_cost(m, no_match_cost))
}

pub(crate) fn raw_cost(m: &Matching, no_match_cost: f64) -> f64 {
    let pairs: f64 = m.pairs.iter().map(|p| p.cost).sum();
    pairs + no_match_cost * (m.unmatched_t1.len() + m.unmatched_t2.len()) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairJson {
    pub t1_xpath: String,
    pub t2_xpath: String,
    pub cost: f64,
}

/// On-disk matching format, keyed by XPath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingJson {
    pub pairs: Vec<PairJson>,
    pub unmatched_t1: Vec<String>,
    pub unmatched_t2: Vec<String>,
}
