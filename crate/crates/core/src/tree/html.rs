//! Lenient HTML ingestion.
//!
//! Tokenization is delegated to html5ever's tokenizer; tree construction is a
//! small forgiving builder rather than the full HTML5 insertion-mode machine.
//! The builder never synthesizes `html`/`head`/`body` and keeps only element
//! nodes, so the tree mirrors the markup as written.

use std::cell::RefCell;

use html5ever::tendril::StrTendril;
use html5ever::tokenizer::states::RawKind;
use html5ever::tokenizer::{
    BufferQueue, Tag, TagKind, Token, TokenSink, TokenSinkResult, Tokenizer, TokenizerOpts,
};

use super::{IngestError, LabeledTree, NodeId, TreeBuilder};

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "keygen", "link", "meta", "param",
    "source", "track", "wbr",
];

/// Start tags that implicitly close an open `<p>`.
const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "details", "dialog", "dir", "div", "dl",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hgroup", "hr", "main", "menu", "nav", "ol", "p", "pre", "section", "table", "ul",
];

/// Elements that bound the search for an implicitly closed element.
const SCOPE_BOUNDARIES: &[&str] = &[
    "applet", "button", "caption", "html", "marquee", "object", "table", "td", "template", "th",
];

/// Elements whose character data is never recorded as text.
const IGNORED_TEXT: &[&str] = &["script", "style", "noscript", "template", "iframe", "noembed", "noframes", "xmp"];

#[derive(Default)]
struct BuilderState {
    tree: TreeBuilder,
    open: Vec<NodeId>,
    root: Option<NodeId>,
}

impl BuilderState {
    fn tag_of(&self, id: NodeId) -> &str {
        self.tree.tag(id)
    }

    fn current(&self) -> Option<NodeId> {
        self.open.last().copied()
    }

    /// Pops up to and including the nearest open `target`, unless one of
    /// `stops` is reached first.
    fn close_implied(&mut self, targets: &[&str], stops: &[&str]) {
        for pos in (0..self.open.len()).rev() {
            let tag = self.tag_of(self.open[pos]);
            if targets.contains(&tag) {
                self.open.truncate(pos);
                return;
            }
            if stops.contains(&tag) || SCOPE_BOUNDARIES.contains(&tag) {
                return;
            }
        }
    }

    fn start_tag(&mut self, tag: Tag) -> TokenSinkResult<()> {
        let name: &str = &tag.name;
        if matches!(name, "html" | "head" | "body")
            && self.open.iter().any(|&id| self.tag_of(id) == name)
        {
            return TokenSinkResult::Continue;
        }

        if CLOSES_P.contains(&name) {
            self.close_implied(&["p"], &[]);
        }
        match name {
            "li" => self.close_implied(&["li"], &["ul", "ol", "menu"]),
            "dt" | "dd" => self.close_implied(&["dt", "dd"], &["dl"]),
            "tr" => {
                self.close_implied(&["td", "th"], &["tr"]);
                self.close_implied(&["tr"], &["tbody", "thead", "tfoot"]);
            }
            "td" | "th" => self.close_implied(&["td", "th"], &["tr"]),
            "thead" | "tbody" | "tfoot" => {
                self.close_implied(&["td", "th"], &["tr"]);
                self.close_implied(&["tr"], &["tbody", "thead", "tfoot"]);
                self.close_implied(&["thead", "tbody", "tfoot"], &[]);
            }
            "option" => self.close_implied(&["option"], &["select", "datalist", "optgroup"]),
            "optgroup" => self.close_implied(&["optgroup", "option"], &["select"]),
            _ => {}
        }

        let attributes = tag
            .attrs
            .iter()
            .map(|a| (a.name.local.to_string(), a.value.to_string()))
            .collect();

        if self.open.is_empty() {
            // Stray top-level element after the root closed: keep it under the root.
            if let Some(root) = self.root {
                self.open.push(root);
            }
        }
        let id = self
            .tree
            .push(self.current(), name.to_string(), attributes, None, None);
        if self.root.is_none() {
            self.root = Some(id);
        }
        if VOID_ELEMENTS.contains(&name) || tag.self_closing {
            return TokenSinkResult::Continue;
        }
        self.open.push(id);

        match name {
            "script" => TokenSinkResult::RawData(RawKind::ScriptData),
            "style" | "xmp" | "iframe" | "noembed" | "noframes" => {
                TokenSinkResult::RawData(RawKind::Rawtext)
            }
            "title" | "textarea" => TokenSinkResult::RawData(RawKind::Rcdata),
            "plaintext" => TokenSinkResult::Plaintext,
            _ => TokenSinkResult::Continue,
        }
    }

    fn end_tag(&mut self, tag: Tag) {
        let name: &str = &tag.name;
        if let Some(pos) = self.open.iter().rposition(|&id| self.tag_of(id) == name) {
            self.open.truncate(pos);
        }
    }

    fn characters(&mut self, text: &str) {
        let Some(current) = self.current() else {
            return;
        };
        if IGNORED_TEXT.contains(&self.tag_of(current)) {
            return;
        }
        let node = self.tree.node_mut(current);
        node.text.get_or_insert_with(String::new).push_str(text);
    }
}

struct Sink(RefCell<BuilderState>);

impl TokenSink for Sink {
    type Handle = ();

    fn process_token(&self, token: Token, _line_number: u64) -> TokenSinkResult<()> {
        let mut state = self.0.borrow_mut();
        match token {
            Token::TagToken(tag) => match tag.kind {
                TagKind::StartTag => state.start_tag(tag),
                TagKind::EndTag => {
                    state.end_tag(tag);
                    TokenSinkResult::Continue
                }
            },
            Token::CharacterTokens(text) => {
                state.characters(&text);
                TokenSinkResult::Continue
            }
            _ => TokenSinkResult::Continue,
        }
    }
}

/// Parses an HTML document into a tree of its element nodes.
///
/// Comments, doctypes and the bodies of `script`/`style` are dropped. Direct
/// text is whitespace-normalized and stored on the owning element. Invalid
/// UTF-8 sequences are replaced rather than rejected.
pub fn parse_html(document: &[u8]) -> Result<LabeledTree, IngestError> {
    let text = String::from_utf8_lossy(document);
    let input = BufferQueue::default();
    input.push_back(StrTendril::from_slice(&text));

    let tokenizer = Tokenizer::new(
        Sink(RefCell::new(BuilderState::default())),
        TokenizerOpts::default(),
    );
    let _ = tokenizer.feed(&input);
    tokenizer.end();

    let state = tokenizer.sink.0.into_inner();
    if state.tree.is_empty() {
        return Err(IngestError::NoRootElement);
    }
    let mut builder = state.tree;
    builder.normalize_text();
    builder.finish().ok_or(IngestError::NoRootElement)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> LabeledTree {
        parse_html(s.as_bytes()).unwrap()
    }

    fn xpaths(t: &LabeledTree) -> Vec<&str> {
        t.nodes().iter().map(|n| n.xpath.as_str()).collect()
    }

    #[test]
    fn simple_document() {
        let t = parse("<html><body><p>hi</p></body></html>");
        assert_eq!(t.size(), 3);
        assert_eq!(t.node(t.root()).tag, "html");
        assert_eq!(t.node(NodeId(2)).xpath, "/html/body/p");
        assert_eq!(t.node(NodeId(2)).text.as_deref(), Some("hi"));
    }

    #[test]
    fn ranked_siblings() {
        let t = parse("<div><p/><p/></div>");
        assert_eq!(xpaths(&t), ["/div", "/div/p[1]", "/div/p[2]"]);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(parse_html(b""), Err(IngestError::NoRootElement)));
        assert!(matches!(
            parse_html(b"<!-- nothing --> just text"),
            Err(IngestError::NoRootElement)
        ));
    }

    #[test]
    fn script_and_comments_are_not_text() {
        let t = parse("<div>a<!-- c --><script>var x = '<p>';</script><style>p{}</style>b</div>");
        assert_eq!(t.size(), 3);
        assert_eq!(t.node(t.root()).text.as_deref(), Some("ab"));
        assert_eq!(t.node(NodeId(1)).text, None);
    }

    #[test]
    fn attributes_kept_in_order() {
        let t = parse(r#"<a href="/x" class="nav  bar" id=top>k</a>"#);
        let attrs = &t.node(t.root()).attributes;
        assert_eq!(
            attrs,
            &[
                ("href".to_string(), "/x".to_string()),
                ("class".to_string(), "nav  bar".to_string()),
                ("id".to_string(), "top".to_string())
            ]
        );
    }

    #[test]
    fn implied_end_tags() {
        let t = parse("<ul><li>a<li>b<li>c</ul><p>x<div>y</div>");
        // ul with three li siblings; the stray p and div hang under the root.
        assert_eq!(
            xpaths(&t),
            ["/ul", "/ul/li[1]", "/ul/li[2]", "/ul/li[3]", "/ul/p", "/ul/div"]
        );
    }

    #[test]
    fn void_elements_have_no_children() {
        let t = parse("<div><img src=a.png><br><span>s</span></div>");
        assert_eq!(xpaths(&t), ["/div", "/div/img", "/div/br", "/div/span"]);
    }

    #[test]
    fn unmatched_end_tags_are_ignored() {
        let t = parse("<div><span>a</b></span></i><em>b</em></div>");
        assert_eq!(xpaths(&t), ["/div", "/div/span", "/div/em"]);
    }

    #[test]
    fn mismatched_end_tag_closes_intermediate() {
        let t = parse("<div><section><b>bold</section><p>after</p></div>");
        assert_eq!(xpaths(&t), ["/div", "/div/section", "/div/section/b", "/div/p"]);
    }

    #[test]
    fn table_cells() {
        let t = parse("<table><tr><td>1<td>2<tr><td>3</table>");
        assert_eq!(
            xpaths(&t),
            [
                "/table",
                "/table/tr[1]",
                "/table/tr[1]/td[1]",
                "/table/tr[1]/td[2]",
                "/table/tr[2]",
                "/table/tr[2]/td"
            ]
        );
    }

    #[test]
    fn whitespace_is_normalized() {
        let t = parse("<p>  hello \n\t world  </p>");
        assert_eq!(t.node(t.root()).text.as_deref(), Some("hello world"));
        let t = parse("<div>\n   <p>x</p>\n</div>");
        assert_eq!(t.node(t.root()).text, None);
    }

    #[test]
    fn duplicate_body_is_ignored() {
        let t = parse("<html><body><p>a</p><body class=x><p>b</p></body></html>");
        assert_eq!(xpaths(&t), ["/html", "/html/body", "/html/body/p[1]", "/html/body/p[2]"]);
    }
}
