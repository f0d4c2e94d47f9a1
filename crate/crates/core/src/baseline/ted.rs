//! Zhang-Shasha ordered tree edit distance with unit costs.

use std::collections::HashMap;
use std::time::Instant;

use super::BaselineError;
use crate::graph::{MatchedPair, Matching};
use crate::tree::{LabeledTree, NodeId};

/// Interned `(tag, sorted attributes)` labels.
type LabelClasses = HashMap<(String, Vec<(String, String)>), u32>;

#[derive(Debug, Clone)]
pub struct TedOutcome {
    pub distance: u32,
    /// Node pairs mapped by one optimal edit script. A pair's cost is its
    /// relabeling cost (0 or 1).
    pub matching: Matching,
}

/// Relabeling cost: 0 when tag and attribute multiset agree, 1 otherwise.
pub fn label_cost(t1: &LabeledTree, n: NodeId, t2: &LabeledTree, m: NodeId) -> u32 {
    let (a, b) = (t1.node(n), t2.node(m));
    if a.tag != b.tag || a.attributes.len() != b.attributes.len() {
        return 1;
    }
    let mut x: Vec<_> = a.attributes.iter().collect();
    let mut y: Vec<_> = b.attributes.iter().collect();
    x.sort();
    y.sort();
    u32::from(x != y)
}

/// Post-order view of a tree, 1-based.
struct PostOrder {
    /// `ids[k]` is the node at post-order position `k`; `ids[0]` is unused.
    ids: Vec<NodeId>,
    /// Leftmost leaf descendant of position `k`.
    lml: Vec<usize>,
    keyroots: Vec<usize>,
    /// Canonical label class per position, so relabel costs are a lookup.
    class: Vec<u32>,
}

impl PostOrder {
    fn new(tree: &LabeledTree, classes: &mut LabelClasses) -> Self {
        let n = tree.size();
        let mut ids = Vec::with_capacity(n + 1);
        let mut lml = Vec::with_capacity(n + 1);
        ids.push(NodeId(0));
        lml.push(0);
        let mut pos_of = vec![0usize; n];
        // Iterative post-order: (node, next child index).
        let mut stack = vec![(tree.root(), 0usize)];
        while let Some(&mut (id, ref mut next)) = stack.last_mut() {
            let children = &tree.node(id).children;
            if *next < children.len() {
                let child = children[*next];
                *next += 1;
                stack.push((child, 0));
                continue;
            }
            stack.pop();
            let k = ids.len();
            ids.push(id);
            pos_of[id.index()] = k;
            lml.push(match children.first() {
                Some(first) => lml[pos_of[first.index()]],
                None => k,
            });
        }

        let mut seen = vec![false; n + 1];
        let mut keyroots = Vec::new();
        for k in (1..=n).rev() {
            if !std::mem::replace(&mut seen[lml[k]], true) {
                keyroots.push(k);
            }
        }
        keyroots.reverse();

        let class = ids
            .iter()
            .map(|&id| {
                let node = tree.node(id);
                let mut attrs = node.attributes.clone();
                attrs.sort();
                let label = (node.tag.clone(), attrs);
                let next = classes.len() as u32;
                *classes.entry(label).or_insert(next)
            })
            .collect();

        PostOrder {
            ids,
            lml,
            keyroots,
            class,
        }
    }

    fn len(&self) -> usize {
        self.ids.len() - 1
    }
}

struct Ted<'a> {
    a: &'a PostOrder,
    b: &'a PostOrder,
    /// Tree distances, `(a.len() + 1) x (b.len() + 1)`.
    td: Vec<u32>,
    fd: Vec<u32>,
}

impl Ted<'_> {
    #[inline]
    fn td(&self, x: usize, y: usize) -> u32 {
        self.td[x * (self.b.len() + 1) + y]
    }

    /// Fills the forest-distance table for the subtrees rooted at `i` and `j`.
    /// Returns the row stride of `fd`.
    fn forest(&mut self, i: usize, j: usize) -> usize {
        let (a, b) = (self.a, self.b);
        let (li, lj) = (a.lml[i], b.lml[j]);
        let rows = i - li + 2;
        let stride = j - lj + 2;
        let fd = &mut self.fd;
        fd.clear();
        fd.resize(rows * stride, 0);
        for x in 1..rows {
            fd[x * stride] = x as u32;
        }
        for y in 1..stride {
            fd[y] = y as u32;
        }
        let tw = b.len() + 1;
        for x in li..=i {
            let fx = x - li + 1;
            let lx = a.lml[x];
            for y in lj..=j {
                let fy = y - lj + 1;
                let ly = b.lml[y];
                let del = fd[(fx - 1) * stride + fy] + 1;
                let ins = fd[fx * stride + fy - 1] + 1;
                let v = if lx == li && ly == lj {
                    let rel = fd[(fx - 1) * stride + fy - 1] + u32::from(a.class[x] != b.class[y]);
                    let v = del.min(ins).min(rel);
                    self.td[x * tw + y] = v;
                    v
                } else {
                    let sub = fd[(lx - li) * stride + (ly - lj)] + self.td[x * tw + y];
                    del.min(ins).min(sub)
                };
                fd[fx * stride + fy] = v;
            }
        }
        stride
    }

    /// Recovers mapped pairs of one optimal script for the subtree pair `(i, j)`,
    /// pushing nested subtree pairs onto `todo`.
    fn trace(&mut self, i: usize, j: usize, out: &mut Vec<(usize, usize)>, todo: &mut Vec<(usize, usize)>) {
        let stride = self.forest(i, j);
        let (a, b) = (self.a, self.b);
        let (li, lj) = (a.lml[i], b.lml[j]);
        let fd = |x: usize, y: usize| self.fd[(x + 1 - li) * stride + (y + 1 - lj)];
        let (mut x, mut y) = (i, j);
        while x >= li || y >= lj {
            // `li - 1` stands for the empty forest; positions start at 1.
            let here = fd(x, y);
            if x >= li && here == fd(x - 1, y) + 1 {
                x -= 1;
            } else if y >= lj && here == fd(x, y - 1) + 1 {
                y -= 1;
            } else if a.lml[x] == li && b.lml[y] == lj {
                out.push((x, y));
                x -= 1;
                y -= 1;
            } else {
                todo.push((x, y));
                x = a.lml[x] - 1;
                y = b.lml[y] - 1;
            }
        }
    }
}

/// Unit-cost edit distance and the node mapping of one optimal script.
pub fn ted_match(t1: &LabeledTree, t2: &LabeledTree) -> TedOutcome {
    ted_match_with_deadline(t1, t2, None).expect("no deadline set")
}

/// As [`ted_match`], checking `deadline` between keyroot pairs.
pub fn ted_match_with_deadline(
    t1: &LabeledTree,
    t2: &LabeledTree,
    deadline: Option<Instant>,
) -> Result<TedOutcome, BaselineError> {
    let mut classes = HashMap::new();
    let a = PostOrder::new(t1, &mut classes);
    let b = PostOrder::new(t2, &mut classes);
    let mut ted = Ted {
        a: &a,
        b: &b,
        td: vec![0; (a.len() + 1) * (b.len() + 1)],
        fd: Vec::new(),
    };
    for &i in &a.keyroots {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(BaselineError::Timeout);
        }
        for &j in &b.keyroots {
            ted.forest(i, j);
        }
    }
    let distance = ted.td(a.len(), b.len());

    let mut mapped = Vec::new();
    let mut todo = vec![(a.len(), b.len())];
    while let Some((i, j)) = todo.pop() {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(BaselineError::Timeout);
        }
        ted.trace(i, j, &mut mapped, &mut todo);
    }

    let pairs = mapped
        .into_iter()
        .map(|(x, y)| MatchedPair {
            n: a.ids[x],
            m: b.ids[y],
            cost: f64::from(u32::from(a.class[x] != b.class[y])),
        })
        .collect();
    let matching = Matching::from_pairs(pairs, t1.size(), t2.size()).expect("edit mappings are one-to-one");
    Ok(TedOutcome { distance, matching })
}
