//! Node tokenization.
//!
//! A node's token set is its tag, each attribute name, the alphabetic words of
//! each attribute value and its absolute XPath. By default every token is
//! prefixed with its kind (`tag:`, `attr:`, `val:`, `xpath:`, `text:`) so that,
//! for instance, a `<class>` element never shares a token with a `class`
//! attribute.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tree::{LabeledTree, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    pub fn new(value: impl Into<String>) -> Self {
        let value = value.into();
        debug_assert!(!value.is_empty(), "tokens are non-empty");
        Token(value)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenizerConfig {
    /// Also emit the words of the node's direct text.
    pub tokenize_content: bool,
    /// Drop the kind prefixes and emit raw strings.
    pub flat_tokens: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Tag,
    Attr,
    Value,
    XPath,
    Text,
}

impl Kind {
    fn prefix(self) -> &'static str {
        match self {
            Kind::Tag => "tag:",
            Kind::Attr => "attr:",
            Kind::Value => "val:",
            Kind::XPath => "xpath:",
            Kind::Text => "text:",
        }
    }
}

/// Splits `s` into maximal runs of ASCII letters; everything else separates.
pub fn string_tokenize(s: &str) -> Vec<&str> {
    s.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Returns the token set of `id`, sorted and de-duplicated.
pub fn tokenize_node(tree: &LabeledTree, id: NodeId, config: TokenizerConfig) -> Vec<Token> {
    let node = tree.node(id);
    let make = |kind: Kind, s: &str| {
        if config.flat_tokens {
            Token(s.to_owned())
        } else {
            Token(format!("{}{s}", kind.prefix()))
        }
    };

    let mut tokens = Vec::with_capacity(2 + 3 * node.attributes.len());
    tokens.push(make(Kind::Tag, &node.tag));
    for (name, value) in &node.attributes {
        if !name.is_empty() {
            tokens.push(make(Kind::Attr, name));
        }
        tokens.extend(string_tokenize(value).into_iter().map(|w| make(Kind::Value, w)));
    }
    if config.tokenize_content
        && let Some(text) = &node.text
    {
        tokens.extend(string_tokenize(text).into_iter().map(|w| make(Kind::Text, w)));
    }
    tokens.push(make(Kind::XPath, &node.xpath));
    tokens.sort_unstable();
    tokens.dedup();
    tokens
}

/// Tokenizes every node of `tree`, indexed by node id.
pub fn tokenize_tree(tree: &LabeledTree, config: TokenizerConfig) -> Vec<Vec<Token>> {
    tree.ids().map(|id| tokenize_node(tree, id, config)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{DomNode, LabeledTree};

    fn strs(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::as_str).collect()
    }

    #[test]
    fn splits_on_non_latin() {
        assert_eq!(string_tokenize("nav-bar main2"), ["nav", "bar", "main"]);
        assert!(string_tokenize("").is_empty());
        assert!(string_tokenize("123 -- __").is_empty());
        assert_eq!(string_tokenize("été"), ["t"]);
        assert_eq!(string_tokenize("camelCase x"), ["camelCase", "x"]);
    }

    #[test]
    fn div_with_class() {
        let t = LabeledTree::from_dom(
            DomNode::new("html").with_child(DomNode::new("div").with_attr("class", "nav-bar")),
        );
        let flat = TokenizerConfig {
            flat_tokens: true,
            ..Default::default()
        };
        let flat_tokens = tokenize_node(&t, NodeId(1), flat);
        let mut got = strs(&flat_tokens);
        got.sort();
        assert_eq!(got, ["/html/div", "bar", "class", "div", "nav"]);

        let kinds = tokenize_node(&t, NodeId(1), TokenizerConfig::default());
        assert_eq!(
            strs(&kinds),
            ["attr:class", "tag:div", "val:bar", "val:nav", "xpath:/html/div"]
        );
    }

    #[test]
    fn bare_element() {
        let t = LabeledTree::from_dom(DomNode::new("html").with_child(DomNode::new("p")));
        let got = tokenize_node(&t, NodeId(1), TokenizerConfig::default());
        assert_eq!(strs(&got), ["tag:p", "xpath:/html/p"]);
    }

    #[test]
    fn duplicate_values_collapse() {
        let t = LabeledTree::from_dom(DomNode::new("a").with_attr("href", "x").with_attr("id", "x"));
        let got = tokenize_node(
            &t,
            NodeId(0),
            TokenizerConfig {
                flat_tokens: true,
                ..Default::default()
            },
        );
        assert_eq!(got.iter().filter(|t| t.as_str() == "x").count(), 1);
        assert_eq!(got.len(), 5);
    }

    #[test]
    fn namespacing_separates_tag_and_attribute() {
        let t = LabeledTree::from_dom(DomNode::new("class").with_attr("class", "class"));
        let ns = tokenize_node(&t, NodeId(0), TokenizerConfig::default());
        assert_eq!(ns.len(), 4);
        let flat = tokenize_node(
            &t,
            NodeId(0),
            TokenizerConfig {
                flat_tokens: true,
                ..Default::default()
            },
        );
        assert_eq!(strs(&flat), ["/class", "class"]);
    }

    #[test]
    fn content_is_opt_in() {
        let t = LabeledTree::from_dom(DomNode::new("p").with_text("Hello world"));
        assert_eq!(tokenize_node(&t, NodeId(0), TokenizerConfig::default()).len(), 2);
        let with_text = tokenize_node(
            &t,
            NodeId(0),
            TokenizerConfig {
                tokenize_content: true,
                ..Default::default()
            },
        );
        assert_eq!(
            strs(&with_text),
            ["tag:p", "text:Hello", "text:world", "xpath:/p"]
        );
    }

    #[test]
    fn output_size_is_bounded() {
        let t = LabeledTree::from_dom(
            DomNode::new("div")
                .with_attr("class", "a b c a")
                .with_attr("data-x", "9 q"),
        );
        let n = tokenize_node(&t, NodeId(0), TokenizerConfig::default()).len();
        let bound = 1 + 2 * 2 + 4 + 1 + 1;
        assert!(n <= bound);
    }
}
