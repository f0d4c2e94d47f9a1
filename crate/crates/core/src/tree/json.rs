//! The neutral JSON tree format:
//! `{"tag": .., "attrs": {..}?, "text": ..?, "signature": ..?, "children": [..]}`.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{DomNode, FormatError, LabeledTree};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonNode {
    tag: String,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    attrs: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signature: Option<String>,
    #[serde(default)]
    children: Vec<JsonNode>,
}

impl From<JsonNode> for DomNode {
    fn from(node: JsonNode) -> Self {
        DomNode {
            tag: node.tag,
            attributes: node.attrs.into_iter().collect(),
            text: node.text,
            signature: node.signature,
            children: node.children.into_iter().map(DomNode::from).collect(),
        }
    }
}

impl From<&DomNode> for JsonNode {
    fn from(node: &DomNode) -> Self {
        JsonNode {
            tag: node.tag.clone(),
            attrs: node.attributes.iter().cloned().collect(),
            text: node.text.clone(),
            signature: node.signature.clone(),
            children: node.children.iter().map(JsonNode::from).collect(),
        }
    }
}

pub fn parse_tree_json(text: &str) -> Result<LabeledTree, FormatError> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let node: JsonNode = serde_path_to_error::deserialize(&mut de).map_err(|e| FormatError {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| FormatError {
        path: ".".into(),
        message: e.to_string(),
    })?;
    if node.tag.is_empty() {
        return Err(FormatError {
            path: "tag".into(),
            message: "tag must be non-empty".into(),
        });
    }
    Ok(LabeledTree::from_dom(node.into()))
}

pub fn serialize_tree_json(tree: &LabeledTree) -> String {
    let node = JsonNode::from(&tree.to_dom());
    serde_json::to_string(&node).expect("tree JSON serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::NodeId;

    #[test]
    fn single_node() {
        let t = parse_tree_json(r#"{"tag":"a","children":[]}"#).unwrap();
        assert_eq!(t.size(), 1);
        assert_eq!(t.node(NodeId(0)).xpath, "/a");
    }

    #[test]
    fn missing_tag_reports_path() {
        let err = parse_tree_json(r#"{"tag":"a","children":[{"tag":"b"},{"children":[]}]}"#)
            .unwrap_err();
        assert_eq!(err.path, "children[1]");
        assert!(err.message.contains("tag"), "{err}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let err =
            parse_tree_json(r#"{"tag":"a","children":[{"tag":"b","attrs":{"x":1}}]}"#).unwrap_err();
        assert_eq!(err.path, "children[0].attrs.x");
    }

    #[test]
    fn round_trip_preserves_everything() {
        let json = r#"{"tag":"html","children":[{"tag":"body","attrs":{"z":"1","a":"2"},"text":"hi","signature":"s1","children":[{"tag":"p"}]}]}"#;
        let t = parse_tree_json(json).unwrap();
        assert_eq!(
            t.node(NodeId(1)).attributes,
            vec![("z".into(), "1".into()), ("a".into(), "2".into())]
        );
        let again = parse_tree_json(&serialize_tree_json(&t)).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(parse_tree_json(r#"{"tag":"a"} x"#).is_err());
    }
}
