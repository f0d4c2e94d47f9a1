//! Label similarity through an inverted token index, and its propagation
//! along ancestor chains.
//!
//! `S0(n, m)` sums the IDF of the tokens shared by `n ∈ T1` and `m ∈ T2`,
//! ignoring tokens held by more than `ceil(|T1|^alpha)` nodes of `T1`.
//! `Sp(n, m)` adds the weighted `S0` of the `i`-th ancestors for `i ≤ p`, and is
//! only evaluated where `S0(n, m) > 0`.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::params::SftmParams;
use crate::tokenize::{Token, TokenizerConfig, tokenize_node, tokenize_tree};
use crate::tree::{LabeledTree, NodeId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("token `{0}` is not in the index")]
    MissingToken(Token),
}

/// Inverted index from token to the `T1` nodes holding it.
#[derive(Debug, Clone, Default)]
pub struct TokenIndex {
    entries: HashMap<Token, Vec<NodeId>>,
    t1_size: usize,
}

impl TokenIndex {
    /// Builds an index from per-node token sets (`sets[i]` belongs to node `i`).
    pub fn from_token_sets(sets: &[Vec<Token>]) -> Self {
        let mut entries: HashMap<Token, Vec<NodeId>> = HashMap::new();
        for (i, tokens) in sets.iter().enumerate() {
            let id = NodeId::from_index(i);
            for token in tokens {
                let nodes = entries.entry(token.clone()).or_default();
                if nodes.last() != Some(&id) {
                    nodes.push(id);
                }
            }
        }
        TokenIndex {
            entries,
            t1_size: sets.len(),
        }
    }

    pub fn t1_size(&self) -> usize {
        self.t1_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, token: &Token) -> Option<&[NodeId]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, &[NodeId])> {
        self.entries.iter().map(|(t, n)| (t, n.as_slice()))
    }

    /// Largest entry size; 0 for an empty index.
    pub fn max_multiplicity(&self) -> usize {
        self.entries.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Sum of entry sizes; bounds the number of candidate edges per `T2` token.
    pub fn total_postings(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn idf(&self, token: &Token) -> Result<f64, SimilarityError> {
        self.entries
            .get(token)
            .map(|nodes| idf_for(self.t1_size, nodes.len()))
            .ok_or_else(|| SimilarityError::MissingToken(token.clone()))
    }
}

#[inline]
fn idf_for(t1_size: usize, multiplicity: usize) -> f64 {
    (t1_size as f64 / multiplicity as f64).ln()
}

/// `ceil(n^alpha)`, with near-integral powers snapped so that e.g.
/// `10000^0.5` yields exactly 100.
pub fn threshold_cutoff(n: usize, alpha: f64) -> usize {
    let x = (n as f64).powf(alpha);
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

pub fn build_token_index(t1: &LabeledTree, config: TokenizerConfig) -> TokenIndex {
    TokenIndex::from_token_sets(&tokenize_tree(t1, config))
}

/// Drops every entry held by more than `ceil(N^alpha)` nodes.
pub fn apply_threshold(mut index: TokenIndex, alpha: f64) -> TokenIndex {
    let cutoff = threshold_cutoff(index.t1_size, alpha);
    index.entries.retain(|_, nodes| nodes.len() <= cutoff);
    index
}

pub fn idf(index: &TokenIndex, token: &Token) -> Result<f64, SimilarityError> {
    index.idf(token)
}

/// Receives every index lookup that feeds a score.
pub trait ScoreObserver {
    fn contribution(&mut self, token: &Token, multiplicity: usize, idf: f64);
}

impl ScoreObserver for () {
    #[inline]
    fn contribution(&mut self, _: &Token, _: usize, _: f64) {}
}

/// Records the largest multiplicity of any token that contributed to a score.
#[derive(Debug, Default, Clone)]
pub struct ThresholdAudit {
    pub lookups: usize,
    pub max_multiplicity: usize,
}

impl ScoreObserver for ThresholdAudit {
    fn contribution(&mut self, _: &Token, multiplicity: usize, idf: f64) {
        if idf > 0.0 {
            self.lookups += 1;
            self.max_multiplicity = self.max_multiplicity.max(multiplicity);
        }
    }
}

/// Dense scratch accumulator reused across `T2` nodes.
struct Accumulator {
    scores: Vec<f64>,
    touched: Vec<NodeId>,
}

impl Accumulator {
    fn new(t1_size: usize) -> Self {
        Accumulator {
            scores: vec![0.0; t1_size],
            touched: Vec::new(),
        }
    }

    fn accumulate<O: ScoreObserver>(&mut self, index: &TokenIndex, tokens: &[Token], obs: &mut O) {
        for token in tokens {
            let Some(nodes) = index.entries.get(token) else {
                continue;
            };
            let weight = idf_for(index.t1_size, nodes.len());
            obs.contribution(token, nodes.len(), weight);
            if weight <= 0.0 {
                continue;
            }
            for &n in nodes {
                let slot = &mut self.scores[n.index()];
                if *slot == 0.0 {
                    self.touched.push(n);
                }
                *slot += weight;
            }
        }
    }

    /// Returns the accumulated row sorted by node id and resets the scratch.
    fn drain(&mut self) -> Vec<(NodeId, f64)> {
        self.touched.sort_unstable();
        let row = self
            .touched
            .iter()
            .map(|&n| (n, std::mem::take(&mut self.scores[n.index()])))
            .collect();
        self.touched.clear();
        row
    }
}

/// `S0(·, m)` for the `T2` node whose token set is `tokens`.
pub fn neighbor_scores(index: &TokenIndex, tokens: &[Token]) -> BTreeMap<NodeId, f64> {
    let mut acc = Accumulator::new(index.t1_size);
    acc.accumulate(index, tokens, &mut ());
    acc.drain().into_iter().collect()
}

/// Sparse `(n, m) → score` table, stored as one row per `T2` node.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    rows: Vec<Vec<(NodeId, f64)>>,
    t1_size: usize,
}

impl SimilarityTable {
    pub fn new(t1_size: usize, t2_size: usize) -> Self {
        SimilarityTable {
            rows: vec![Vec::new(); t2_size],
            t1_size,
        }
    }

    /// Builds a table from explicit entries; non-positive scores are dropped.
    pub fn from_entries(
        t1_size: usize,
        t2_size: usize,
        entries: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Self {
        let mut table = Self::new(t1_size, t2_size);
        for (n, m, s) in entries {
            assert!(n.index() < t1_size && m.index() < t2_size, "entry out of range");
            if s > 0.0 {
                table.rows[m.index()].push((n, s));
            }
        }
        for row in &mut table.rows {
            row.sort_by_key(|&(n, _)| n);
            row.dedup_by_key(|&mut (n, _)| n);
        }
        table
    }

    pub fn t1_size(&self) -> usize {
        self.t1_size
    }

    pub fn t2_size(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, n: NodeId, m: NodeId) -> f64 {
        let Some(row) = self.rows.get(m.index()) else {
            return 0.0;
        };
        row.binary_search_by_key(&n, |&(k, _)| k)
            .map_or(0.0, |pos| row[pos].1)
    }

    /// Entries of `S(·, m)`, sorted by `T1` id.
    pub fn row(&self, m: NodeId) -> &[(NodeId, f64)] {
        self.rows.get(m.index()).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    /// All `(n, m, score)` entries, ordered by `m` then `n`.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(m, row)| {
            let m = NodeId::from_index(m);
            row.iter().map(move |&(n, s)| (n, m, s))
        })
    }
}

/// `S0` over all `T2` nodes: index `T1`, threshold, then score every `m`.
pub fn initial_similarity(t1: &LabeledTree, t2: &LabeledTree, params: &SftmParams) -> SimilarityTable {
    initial_similarity_observed(t1, t2, params, &mut ())
}

pub fn initial_similarity_observed<O: ScoreObserver>(
    t1: &LabeledTree,
    t2: &LabeledTree,
    params: &SftmParams,
    observer: &mut O,
) -> SimilarityTable {
    let index = apply_threshold(build_token_index(t1, params.tokenizer), params.alpha);
    similarity_from_index(&index, t2, params.tokenizer, observer)
}

pub fn similarity_from_index<O: ScoreObserver>(
    index: &TokenIndex,
    t2: &LabeledTree,
    config: TokenizerConfig,
    observer: &mut O,
) -> SimilarityTable {
    let mut acc = Accumulator::new(index.t1_size);
    let rows = t2
        .ids()
        .map(|m| {
            let tokens = tokenize_node(t2, m, config);
            acc.accumulate(index, &tokens, observer);
            acc.drain()
        })
        .collect();
    SimilarityTable {
        rows,
        t1_size: index.t1_size,
    }
}

/// `Sp(n, m) = Σ_{i=0..=p} w_i · S0(parent^i(n), parent^i(m))` over the
/// support of `S0`. Terms whose ancestors do not both exist contribute 0.
pub fn propagate(
    s0: &SimilarityTable,
    t1: &LabeledTree,
    t2: &LabeledTree,
    params: &SftmParams,
) -> SimilarityTable {
    let weights = &params.weights[..=params.p.min(params.weights.len() - 1)];
    let rows = (0..s0.t2_size())
        .map(|m| {
            let m = NodeId::from_index(m);
            s0.row(m)
                .iter()
                .map(|&(n, s)| {
                    let mut score = weights[0] * s;
                    let (mut a, mut b) = (n, m);
                    for &w in &weights[1..] {
                        match (t1.node(a).parent, t2.node(b).parent) {
                            (Some(pa), Some(pb)) => {
                                a = pa;
                                b = pb;
                            }
                            _ => break,
                        }
                        if w != 0.0 {
                            score += w * s0.get(a, b);
                        }
                    }
                    (n, score)
                })
                .collect()
        })
        .collect();
    SimilarityTable {
        rows,
        t1_size: s0.t1_size,
    }
}

#[derive(Serialize)]
struct DumpScore<'a> {
    t1_xpath: &'a str,
    t2_xpath: &'a str,
    score: f64,
}

/// Diagnostic JSON: token multiplicities and the non-zero similarity entries.
pub fn debug_dump(
    index: &TokenIndex,
    table: &SimilarityTable,
    t1: &LabeledTree,
    t2: &LabeledTree,
) -> serde_json::Value {
    let tokens: BTreeMap<&str, usize> = index.iter().map(|(t, n)| (t.as_str(), n.len())).collect();
    let scores: Vec<DumpScore> = table
        .iter()
        .map(|(n, m, score)| DumpScore {
            t1_xpath: &t1.node(n).xpath,
            t2_xpath: &t2.node(m).xpath,
            score,
        })
        .collect();
    serde_json::json!({ "tokens": tokens, "scores": scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::DomNode;

    fn t(s: &str) -> Token {
        Token::new(s)
    }

    fn sets(spec: &[&[&str]]) -> Vec<Vec<Token>> {
        spec.iter().map(|s| s.iter().map(|x| t(x)).collect()).collect()
    }

    #[test]
    fn single_node_index() {
        let tree = LabeledTree::from_dom(DomNode::new("p"));
        let index = build_token_index(&tree, TokenizerConfig::default());
        assert_eq!(index.len(), 2);
        assert_eq!(index.entry(&t("tag:p")), Some(&[NodeId(0)][..]));
        assert_eq!(index.entry(&t("xpath:/p")), Some(&[NodeId(0)][..]));
    }

    #[test]
    fn sibling_index() {
        let tree = LabeledTree::from_dom(
            DomNode::new("div")
                .with_child(DomNode::new("p"))
                .with_child(DomNode::new("p")),
        );
        let index = build_token_index(&tree, TokenizerConfig::default());
        assert_eq!(index.entry(&t("tag:p")), Some(&[NodeId(1), NodeId(2)][..]));
        assert_eq!(index.entry(&t("xpath:/div/p[1]")).unwrap().len(), 1);
        assert_eq!(index.entry(&t("xpath:/div/p[2]")).unwrap().len(), 1);
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(threshold_cutoff(10_000, 0.5), 100);
        assert_eq!(threshold_cutoff(100, 0.5), 10);
        assert_eq!(threshold_cutoff(10, 0.5), 4);
        assert_eq!(threshold_cutoff(1000, 1.0), 1000);
        assert_eq!(threshold_cutoff(1, 0.3), 1);
    }

    #[test]
    fn threshold_drops_large_entries() {
        // 100 nodes; tokens held by 5, 10 and 11 nodes.
        let spec: Vec<Vec<Token>> = (0..100)
            .map(|i| {
                let mut v = vec![t(&format!("u{i}"))];
                if i < 5 {
                    v.push(t("five"));
                }
                if i < 10 {
                    v.push(t("ten"));
                }
                if i < 11 {
                    v.push(t("eleven"));
                }
                v
            })
            .collect();
        let index = apply_threshold(TokenIndex::from_token_sets(&spec), 0.5);
        assert!(index.entry(&t("five")).is_some());
        assert!(index.entry(&t("ten")).is_some());
        assert!(index.entry(&t("eleven")).is_none());

        let all = apply_threshold(TokenIndex::from_token_sets(&spec), 1.0);
        assert_eq!(all.len(), 103);
    }

    #[test]
    fn threshold_at_scale() {
        let spec: Vec<Vec<Token>> = (0..10_000)
            .map(|i| if i < 101 { vec![t("big")] } else if i < 201 { vec![t("edge")] } else { vec![] })
            .collect();
        let index = apply_threshold(TokenIndex::from_token_sets(&spec), 0.5);
        assert!(index.entry(&t("big")).is_none());
        assert_eq!(index.entry(&t("edge")).unwrap().len(), 100);
    }

    #[test]
    fn idf_values() {
        let spec: Vec<Vec<Token>> = (0..100)
            .map(|i| {
                let mut v = vec![t("all")];
                if i < 10 {
                    v.push(t("ten"));
                }
                v
            })
            .collect();
        let index = TokenIndex::from_token_sets(&spec);
        assert!((index.idf(&t("ten")).unwrap() - 10f64.ln()).abs() < 1e-12);
        assert_eq!(index.idf(&t("all")).unwrap(), 0.0);
        assert_eq!(
            index.idf(&t("nope")),
            Err(SimilarityError::MissingToken(t("nope")))
        );
        let single = TokenIndex::from_token_sets(&sets(&[&["x"]]));
        assert_eq!(single.idf(&t("x")).unwrap(), 0.0);
    }

    #[test]
    fn idf_is_monotone_in_rarity() {
        let spec: Vec<Vec<Token>> = (0..50)
            .map(|i| (1..=10).filter(|k| i % k == 0).map(|k| t(&format!("k{k}"))).collect())
            .collect();
        let index = TokenIndex::from_token_sets(&spec);
        let mut by_size: Vec<(usize, f64)> = index.iter().map(|(tok, n)| (n.len(), index.idf(tok).unwrap())).collect();
        by_size.sort_by_key(|a| a.0);
        for w in by_size.windows(2) {
            if w[0].0 < w[1].0 {
                assert!(w[0].1 > w[1].1);
            }
        }
    }

    #[test]
    fn neighbor_scores_sum_shared_idf() {
        let index = TokenIndex::from_token_sets(&sets(&[
            &["a", "b", "c"],
            &["a", "d"],
            &["e"],
            &["f"],
        ]));
        let none = neighbor_scores(&index, &[t("zzz")]);
        assert!(none.is_empty());

        let scores = neighbor_scores(&index, &[t("a"), t("b"), t("q")]);
        let expected0 = index.idf(&t("a")).unwrap() + index.idf(&t("b")).unwrap();
        assert_eq!(scores.len(), 2);
        assert!((scores[&NodeId(0)] - expected0).abs() < 1e-15);
        assert!((scores[&NodeId(1)] - index.idf(&t("a")).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ubiquitous_tokens_add_no_neighbors() {
        let index = TokenIndex::from_token_sets(&sets(&[&["x", "a"], &["x"]]));
        let scores = neighbor_scores(&index, &[t("x")]);
        assert!(scores.is_empty());
    }

    #[test]
    fn identical_single_node_trees() {
        let a = LabeledTree::from_dom(DomNode::new("p").with_attr("class", "x y"));
        let params = SftmParams::default();
        let s0 = initial_similarity(&a, &a, &params);
        // |T1| = 1 makes every IDF zero, so the pair's score (the IDF sum) is 0
        // and, being non-positive, is not stored.
        assert!(s0.is_empty());
        assert_eq!(s0.get(NodeId(0), NodeId(0)), 0.0);
    }

    #[test]
    fn disjoint_vocabularies() {
        let a = LabeledTree::from_dom(DomNode::new("a").with_child(DomNode::new("b")));
        let b = LabeledTree::from_dom(DomNode::new("x").with_child(DomNode::new("y")));
        assert!(initial_similarity(&a, &b, &SftmParams::default()).is_empty());
    }

    #[test]
    fn propagate_identity_when_p_is_zero() {
        let tree = LabeledTree::from_dom(
            DomNode::new("ul").with_children((0..4).map(|i| DomNode::new("li").with_attr("id", format!("i{}", "abcd".chars().nth(i).unwrap())))),
        );
        let params = SftmParams::default().with_weights(vec![1.0]);
        let s0 = initial_similarity(&tree, &tree, &SftmParams { alpha: 1.0, ..params.clone() });
        assert_eq!(propagate(&s0, &tree, &tree, &params), s0);
    }

    #[test]
    fn propagate_roots_have_no_ancestors() {
        let a = LabeledTree::from_dom(DomNode::new("r"));
        let s0 = SimilarityTable::from_entries(1, 1, [(NodeId(0), NodeId(0), 2.0)]);
        let params = SftmParams::default();
        let sp = propagate(&s0, &a, &a, &params);
        assert_eq!(sp.get(NodeId(0), NodeId(0)), 2.0 * params.weights[0]);
    }

    #[test]
    fn propagate_chain() {
        let a = LabeledTree::from_dom(DomNode::new("a").with_child(DomNode::new("b")));
        let b = LabeledTree::from_dom(DomNode::new("a").with_child(DomNode::new("b")));
        let s0 = SimilarityTable::from_entries(
            2,
            2,
            [(NodeId(0), NodeId(0), 1.0), (NodeId(1), NodeId(1), 1.0)],
        );
        let params = SftmParams::default().with_weights(vec![1.0, 0.5]);
        let sp = propagate(&s0, &a, &b, &params);
        assert_eq!(sp.get(NodeId(1), NodeId(1)), 1.5);
        assert_eq!(sp.get(NodeId(0), NodeId(0)), 1.0);
        assert_eq!(sp.len(), 2);
    }

    #[test]
    fn propagate_skips_pairs_without_initial_score() {
        let a = LabeledTree::from_dom(DomNode::new("a").with_child(DomNode::new("b")));
        let s0 = SimilarityTable::from_entries(2, 2, [(NodeId(0), NodeId(0), 3.0)]);
        let sp = propagate(&s0, &a, &a, &SftmParams::default());
        assert_eq!(sp.get(NodeId(1), NodeId(1)), 0.0);
        assert_eq!(sp.len(), 1);
    }

    #[test]
    fn audit_sees_only_thresholded_tokens() {
        let tree = LabeledTree::from_dom(
            DomNode::new("ul").with_children((0..30).map(|i| {
                DomNode::new("li").with_attr("class", if i % 3 == 0 { "even item" } else { "item" })
            })),
        );
        let params = SftmParams::default();
        let mut audit = ThresholdAudit::default();
        initial_similarity_observed(&tree, &tree, &params, &mut audit);
        assert!(audit.lookups > 0);
        assert!(audit.max_multiplicity <= threshold_cutoff(tree.size(), params.alpha));
    }

    #[test]
    fn debug_dump_shape() {
        let tree = LabeledTree::from_dom(DomNode::new("a").with_child(DomNode::new("b")));
        let params = SftmParams::default();
        let index = apply_threshold(build_token_index(&tree, params.tokenizer), params.alpha);
        let s0 = similarity_from_index(&index, &tree, params.tokenizer, &mut ());
        let dump = debug_dump(&index, &s0, &tree, &tree);
        assert_eq!(dump["tokens"]["xpath:/a/b"], 1);
        assert_eq!(dump["scores"].as_array().unwrap().len(), 2);
    }
}
