//! Rooted, ordered, labeled trees.
//!
//! A [`LabeledTree`] is an immutable arena of [`TreeNode`]s addressed by dense
//! [`NodeId`]s assigned in document (pre-)order. Trees are built either from
//! HTML ([`parse_html`]), from the JSON tree format ([`parse_tree_json`]) or
//! from an owned [`DomNode`] hierarchy ([`LabeledTree::from_dom`]).

mod html;
mod json;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use html::parse_html;
pub use json::{parse_tree_json, serialize_tree_json};

/// Index of a node inside its [`LabeledTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        NodeId(u32::try_from(index).expect("node index exceeds u32 range"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Errors raised while ingesting a document.
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("document contains no root element")]
    NoRootElement,
}

/// Errors raised by the JSON tree reader.
#[derive(Debug, thiserror::Error)]
#[error("invalid tree JSON at `{path}`: {message}")]
pub struct FormatError {
    /// Location of the offending element, e.g. `children[2].tag`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: NodeId,
    pub tag: String,
    pub attributes: Vec<(String, String)>,
    /// Concatenated direct text content, `None` when the element has none.
    pub text: Option<String>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub xpath: String,
    pub depth: usize,
    /// Ground-truth label used by the evaluation harness. Never consulted by matchers.
    pub signature: Option<String>,
}

impl TreeNode {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

/// An owned, recursive element used to build and edit trees before they are
/// frozen into a [`LabeledTree`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DomNode {
    pub tag: String,
    pub attributes: Vec<(String, String)>,
    pub text: Option<String>,
    pub signature: Option<String>,
    pub children: Vec<DomNode>,
}

impl DomNode {
    pub fn new(tag: impl Into<String>) -> Self {
        DomNode {
            tag: tag.into(),
            ..Default::default()
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.push((name.into(), value.into()));
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_child(mut self, child: DomNode) -> Self {
        self.children.push(child);
        self
    }

    pub fn with_children(mut self, children: impl IntoIterator<Item = DomNode>) -> Self {
        self.children.extend(children);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTree {
    nodes: Vec<TreeNode>,
}

impl LabeledTree {
    /// Freezes a [`DomNode`] hierarchy, assigning ids in pre-order and
    /// computing absolute XPaths.
    pub fn from_dom(root: DomNode) -> Self {
        let mut builder = TreeBuilder::default();
        // Explicit stack: (node, parent). Children are pushed in reverse so they pop in order.
        let mut stack = vec![(root, None)];
        while let Some((node, parent)) = stack.pop() {
            let DomNode {
                tag,
                attributes,
                text,
                signature,
                children,
            } = node;
            let id = builder.push(parent, tag, attributes, text, signature);
            for child in children.into_iter().rev() {
                stack.push((child, Some(id)));
            }
        }
        builder.finish().expect("from_dom always produces a root")
    }

    pub fn to_dom(&self) -> DomNode {
        self.subtree_dom(self.root())
    }

    pub fn subtree_dom(&self, id: NodeId) -> DomNode {
        let node = self.node(id);
        DomNode {
            tag: node.tag.clone(),
            attributes: node.attributes.clone(),
            text: node.text.clone(),
            signature: node.signature.clone(),
            children: node.children.iter().map(|&c| self.subtree_dom(c)).collect(),
        }
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.index()]
    }

    pub fn get(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.get(id.index())
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId::from_index)
    }

    /// Returns the `i`-th ancestor of `id`; `i = 0` is the node itself.
    pub fn ancestor(&self, id: NodeId, i: usize) -> Option<NodeId> {
        let mut current = id;
        for _ in 0..i {
            current = self.node(current).parent?;
        }
        Some(current)
    }

    /// True when `descendant` lies strictly below `ancestor`.
    pub fn is_descendant(&self, descendant: NodeId, ancestor: NodeId) -> bool {
        let mut current = self.node(descendant).parent;
        while let Some(p) = current {
            if p == ancestor {
                return true;
            }
            current = self.node(p).parent;
        }
        false
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn has_signatures(&self) -> bool {
        self.nodes.iter().any(|n| n.signature.is_some())
    }

    /// Returns a copy of the tree with every signature replaced by `f(id)`.
    pub fn with_signatures(&self, mut f: impl FnMut(NodeId) -> Option<String>) -> Self {
        let mut nodes = self.nodes.clone();
        for node in &mut nodes {
            node.signature = f(node.id);
        }
        LabeledTree { nodes }
    }
}

/// Incremental pre-order builder. Nodes must be pushed after their parent and
/// after all earlier siblings' subtrees.
#[derive(Debug, Default)]
pub(crate) struct TreeBuilder {
    nodes: Vec<TreeNode>,
}

impl TreeBuilder {
    pub(crate) fn push(
        &mut self,
        parent: Option<NodeId>,
        tag: String,
        attributes: Vec<(String, String)>,
        text: Option<String>,
        signature: Option<String>,
    ) -> NodeId {
        let id = NodeId::from_index(self.nodes.len());
        let depth = parent.map_or(0, |p| self.nodes[p.index()].depth + 1);
        if let Some(p) = parent {
            self.nodes[p.index()].children.push(id);
        } else {
            assert!(self.nodes.is_empty(), "a tree has exactly one root");
        }
        self.nodes.push(TreeNode {
            id,
            tag,
            attributes,
            text,
            parent,
            children: Vec::new(),
            xpath: String::new(),
            depth,
            signature,
        });
        id
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut TreeNode {
        &mut self.nodes[id.index()]
    }

    pub(crate) fn tag(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].tag
    }

    /// Collapses whitespace runs in every text field; blank text becomes `None`.
    pub(crate) fn normalize_text(&mut self) {
        for node in &mut self.nodes {
            if let Some(text) = node.text.take() {
                let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
                if !joined.is_empty() {
                    node.text = Some(joined);
                }
            }
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn finish(mut self) -> Option<LabeledTree> {
        if self.nodes.is_empty() {
            return None;
        }
        compute_xpaths(&mut self.nodes);
        Some(LabeledTree { nodes: self.nodes })
    }
}

/// Fills `xpath` for every node. Parents precede children in pre-order, so a
/// single forward pass suffices.
fn compute_xpaths(nodes: &mut [TreeNode]) {
    nodes[0].xpath = format!("/{}", nodes[0].tag);
    for i in 0..nodes.len() {
        let children = std::mem::take(&mut nodes[i].children);
        let base = nodes[i].xpath.clone();
        let mut totals: HashMap<String, usize> = HashMap::new();
        for &child in &children {
            *totals.entry(nodes[child.index()].tag.clone()).or_default() += 1;
        }
        let mut seen: HashMap<String, usize> = HashMap::new();
        for &child in &children {
            let tag = &nodes[child.index()].tag;
            let rank = seen.entry(tag.clone()).or_default();
            *rank += 1;
            let xpath = if totals[tag] >= 2 {
                format!("{base}/{tag}[{rank}]")
            } else {
                format!("{base}/{tag}")
            };
            nodes[child.index()].xpath = xpath;
        }
        nodes[i].children = children;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> LabeledTree {
        LabeledTree::from_dom(
            DomNode::new("html").with_child(
                DomNode::new("body").with_child(DomNode::new("div").with_child(DomNode::new("p"))),
            ),
        )
    }

    #[test]
    fn preorder_ids_and_xpaths() {
        let t = LabeledTree::from_dom(
            DomNode::new("div")
                .with_child(DomNode::new("p").with_child(DomNode::new("b")))
                .with_child(DomNode::new("span"))
                .with_child(DomNode::new("p")),
        );
        let xp: Vec<_> = t.nodes().iter().map(|n| n.xpath.as_str()).collect();
        assert_eq!(xp, ["/div", "/div/p[1]", "/div/p[1]/b", "/div/span", "/div/p[2]"]);
        assert_eq!(t.node(NodeId(2)).parent, Some(NodeId(1)));
        assert_eq!(t.node(NodeId(0)).children, vec![NodeId(1), NodeId(3), NodeId(4)]);
        assert_eq!(t.node(NodeId(2)).depth, 2);
    }

    #[test]
    fn ancestor_walks_parent_chain() {
        let t = chain();
        let leaf = NodeId(3);
        assert_eq!(t.ancestor(leaf, 0), Some(leaf));
        assert_eq!(t.ancestor(leaf, 2), Some(NodeId(1)));
        assert_eq!(t.ancestor(leaf, 3), Some(NodeId(0)));
        assert_eq!(t.ancestor(leaf, 4), None);
        assert_eq!(t.ancestor(t.root(), 1), None);
    }

    #[test]
    fn descendant_relation() {
        let t = chain();
        assert!(t.is_descendant(NodeId(3), NodeId(0)));
        assert!(!t.is_descendant(NodeId(0), NodeId(3)));
        assert!(!t.is_descendant(NodeId(2), NodeId(2)));
    }

    #[test]
    fn dom_round_trip() {
        let dom = DomNode::new("ul")
            .with_attr("class", "menu")
            .with_children((0..3).map(|i| DomNode::new("li").with_text(format!("item {i}"))));
        let t = LabeledTree::from_dom(dom.clone());
        assert_eq!(t.to_dom(), dom);
    }
}
