//! HTML ingestion: cleaning, lenient tag-soup parsing, leaf-text extraction,
//! XPath unit derivation and parent-child edge construction.
//!
//! The parser is deliberately forgiving. It never fails on malformed markup:
//! unclosed elements are closed when an ancestor closes, stray end tags are
//! dropped, and `html`/`body` wrappers are synthesized when missing so every
//! tree is rooted at `html`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// Default number of XPath units kept per node.
pub const DEFAULT_MAX_DEPTH: usize = 15;
/// Default subscript table size; subscripts are clamped to `size - 1`.
pub const DEFAULT_SUBSCRIPT_TABLE: usize = 64;

const REMOVED_ELEMENTS: [&str; 4] = ["script", "style", "noscript", "iframe"];
const VOID_ELEMENTS: [&str; 14] = [
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];
const HEAD_ELEMENTS: [&str; 5] = ["title", "meta", "link", "base", "template"];
/// Elements implicitly closed by an immediately following sibling of the same name.
const SELF_CLOSING_SIBLINGS: [&str; 8] = ["p", "li", "dt", "dd", "tr", "td", "th", "option"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomNode {
    pub tag: String,
    pub parent: Option<usize>,
    /// Number of preceding siblings with the same tag.
    pub subscript: usize,
    pub leaf_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    /// Nodes in document (pre-)order. Parents always precede their children.
    pub nodes: Vec<DomNode>,
    pub root_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct XPathUnit {
    pub tag: String,
    pub subscript: usize,
}

impl XPathUnit {
    pub fn new(tag: impl Into<String>, subscript: usize) -> Self {
        Self {
            tag: tag.into(),
            subscript,
        }
    }
}

/// Root-to-node path of `(tag, subscript)` steps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct XPathUnits {
    pub units: Vec<XPathUnit>,
}

impl XPathUnits {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

/// Directed edges; every parent-child pair appears in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeList {
    pub edges: Vec<(usize, usize)>,
}

/// One page reduced to what the model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct PageRecord {
    pub id: String,
    pub label: String,
    pub tokens: Vec<String>,
    pub nodes: Vec<XPathUnits>,
    pub edges: EdgeList,
}

/// Limits applied when deriving XPath units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XPathLimits {
    pub max_depth: usize,
    pub subscript_table: usize,
}

impl Default for XPathLimits {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            subscript_table: DEFAULT_SUBSCRIPT_TABLE,
        }
    }
}

impl DomTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self, node: usize) -> usize {
        let mut depth = 0;
        let mut cur = self.nodes[node].parent;
        while let Some(p) = cur {
            depth += 1;
            cur = self.nodes[p].parent;
        }
        depth
    }

    pub fn children(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.parent == Some(node))
            .map(|(i, _)| i)
    }
}

fn lowercase_ascii(s: &str) -> Vec<u8> {
    s.bytes().map(|b| b.to_ascii_lowercase()).collect()
}

fn find_from(haystack: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= haystack.len() || needle.is_empty() {
        return None;
    }
    haystack[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

fn is_name_end(b: Option<&u8>) -> bool {
    match b {
        None => true,
        Some(c) => c.is_ascii_whitespace() || *c == b'>' || *c == b'/',
    }
}

/// Start of a removable element's open tag at `pos`, returning its name.
fn removable_at(lower: &[u8], pos: usize) -> Option<&'static str> {
    if lower[pos] != b'<' {
        return None;
    }
    REMOVED_ELEMENTS.into_iter().find(|name| {
        let end = pos + 1 + name.len();
        end <= lower.len() && &lower[pos + 1..end] == name.as_bytes() && is_name_end(lower.get(end))
    })
}

/// End of the closing tag `</name ...>` searched from `from`, or the end of input.
fn skip_to_close(lower: &[u8], name: &str, from: usize) -> usize {
    let needle = format!("</{name}");
    let mut search = from;
    while let Some(p) = find_from(lower, needle.as_bytes(), search) {
        let after = p + needle.len();
        if is_name_end(lower.get(after)) {
            return match lower[after..].iter().position(|&b| b == b'>') {
                Some(gt) => after + gt + 1,
                None => lower.len(),
            };
        }
        search = after;
    }
    lower.len()
}

/// Remove comments and `script`, `style`, `noscript` and `iframe` elements with
/// their contents. Everything else is copied through unchanged.
pub fn clean_html(raw: &str) -> String {
    let lower = lowercase_ascii(raw);
    let bytes = raw.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            if lower[i..].starts_with(b"<!--") {
                i = match find_from(&lower, b"-->", i + 4) {
                    Some(p) => p + 3,
                    None => bytes.len(),
                };
                continue;
            }
            if let Some(name) = removable_at(&lower, i) {
                // Skip the open tag first so attributes cannot fake a close tag.
                let open_end = match lower[i..].iter().position(|&b| b == b'>') {
                    Some(gt) => i + gt + 1,
                    None => bytes.len(),
                };
                i = skip_to_close(&lower, name, open_end);
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    // Removal happens only at ASCII '<' boundaries, so UTF-8 stays valid.
    String::from_utf8(out).expect("removals preserve char boundaries")
}

enum Token<'a> {
    Text(&'a str),
    Start { name: String, self_closing: bool },
    End { name: String },
}

fn is_tag_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'-' || b == b':' || b == b'_'
}

/// Index just past the `>` closing a tag, honouring quoted attribute values.
fn tag_end(bytes: &[u8], from: usize) -> usize {
    let mut quote: Option<u8> = None;
    let mut i = from;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return i + 1,
            None => {}
        }
        i += 1;
    }
    bytes.len()
}

fn tokenize_html(src: &str) -> Vec<Token<'_>> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut text_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let (is_end, name_start) = match next {
            Some(b'/') => (true, i + 2),
            _ => (false, i + 1),
        };
        let markup = matches!(next, Some(b'!' | b'?'));
        let starts_name = bytes
            .get(name_start)
            .is_some_and(|b| b.is_ascii_alphabetic());
        if !markup && !starts_name {
            i += 1;
            continue;
        }
        if text_start < i {
            tokens.push(Token::Text(&src[text_start..i]));
        }
        if markup {
            // Doctype, processing instruction, CDATA or leftover comment.
            i = if src[i..].starts_with("<!--") {
                src[i + 4..]
                    .find("-->")
                    .map_or(bytes.len(), |p| i + 4 + p + 3)
            } else {
                tag_end(bytes, i + 2)
            };
            text_start = i;
            continue;
        }
        let mut name_end = name_start;
        while name_end < bytes.len() && is_tag_name_byte(bytes[name_end]) {
            name_end += 1;
        }
        let name = src[name_start..name_end].to_ascii_lowercase();
        let end = tag_end(bytes, name_end);
        if is_end {
            tokens.push(Token::End { name });
        } else {
            let self_closing = end >= 2 && bytes[end - 1] == b'>' && bytes[end - 2] == b'/';
            tokens.push(Token::Start { name, self_closing });
        }
        i = end;
        text_start = i;
    }
    if text_start < bytes.len() {
        tokens.push(Token::Text(&src[text_start..]));
    }
    tokens
}

fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let semi = rest[1..].find(';').map(|p| p + 1).filter(|&p| p <= 10);
        let decoded = semi.and_then(|p| {
            let entity = &rest[1..p];
            let ch = match entity {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                _ => {
                    let code = if let Some(hex) = entity
                        .strip_prefix("#x")
                        .or_else(|| entity.strip_prefix("#X"))
                    {
                        u32::from_str_radix(hex, 16).ok()
                    } else if let Some(dec) = entity.strip_prefix('#') {
                        dec.parse::<u32>().ok()
                    } else {
                        None
                    };
                    code.and_then(char::from_u32)
                }
            };
            ch.map(|c| (c, p + 1))
        });
        match decoded {
            Some((c, consumed)) => {
                out.push(c);
                rest = &rest[consumed..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

struct TreeBuilder {
    nodes: Vec<DomNode>,
    texts: Vec<String>,
    has_children: Vec<bool>,
    stack: Vec<usize>,
    head: Option<usize>,
    body: Option<usize>,
}

impl TreeBuilder {
    fn new() -> Self {
        let mut b = Self {
            nodes: Vec::new(),
            texts: Vec::new(),
            has_children: Vec::new(),
            stack: Vec::new(),
            head: None,
            body: None,
        };
        let root = b.create("html".to_string(), None);
        b.stack.push(root);
        b
    }

    fn create(&mut self, tag: String, parent: Option<usize>) -> usize {
        let idx = self.nodes.len();
        if let Some(p) = parent {
            self.has_children[p] = true;
        }
        self.nodes.push(DomNode {
            tag,
            parent,
            subscript: 0,
            leaf_text: None,
        });
        self.texts.push(String::new());
        self.has_children.push(false);
        idx
    }

    fn top(&self) -> usize {
        *self.stack.last().expect("root never popped")
    }

    fn in_head(&self) -> bool {
        self.head.is_some_and(|h| self.stack.contains(&h))
    }

    /// Make sure content lands inside `body`, synthesizing it when needed.
    fn ensure_body(&mut self) {
        if let Some(h) = self.head {
            if let Some(pos) = self.stack.iter().position(|&n| n == h) {
                self.stack.truncate(pos);
            }
        }
        match self.body {
            Some(b) => {
                if !self.stack.contains(&b) {
                    self.stack.truncate(1);
                    self.stack.push(b);
                }
            }
            None => {
                self.stack.truncate(1);
                let b = self.create("body".to_string(), Some(0));
                self.body = Some(b);
                self.stack.push(b);
            }
        }
    }

    fn start(&mut self, name: String, self_closing: bool) {
        match name.as_str() {
            "html" => return,
            "body" => {
                self.ensure_body();
                return;
            }
            "head" => {
                if self.head.is_none() && self.body.is_none() {
                    let h = self.create(name, Some(0));
                    self.head = Some(h);
                    self.stack.truncate(1);
                    self.stack.push(h);
                }
                return;
            }
            _ => {}
        }
        let head_content = self.body.is_none() && HEAD_ELEMENTS.contains(&name.as_str());
        if head_content {
            if !self.in_head() {
                let h = match self.head {
                    Some(h) => h,
                    None => {
                        let h = self.create("head".to_string(), Some(0));
                        self.head = Some(h);
                        h
                    }
                };
                self.stack.truncate(1);
                self.stack.push(h);
            }
        } else {
            // Elements nested inside head content (e.g. <title>) stay put;
            // everything else belongs to the body.
            let nested_in_head = self.in_head() && Some(self.top()) != self.head;
            let in_body = self.body.is_some_and(|b| self.stack.contains(&b));
            if !nested_in_head && !in_body {
                self.ensure_body();
            }
        }
        if SELF_CLOSING_SIBLINGS.contains(&name.as_str()) && self.nodes[self.top()].tag == name {
            self.stack.pop();
        }
        let parent = self.top();
        let idx = self.create(name, Some(parent));
        let tag = self.nodes[idx].tag.as_str();
        if !self_closing && !VOID_ELEMENTS.contains(&tag) {
            self.stack.push(idx);
        }
    }

    fn end(&mut self, name: &str) {
        if matches!(name, "html" | "body") {
            return;
        }
        // Root at position 0 is never closed.
        if let Some(pos) = self.stack.iter().rposition(|&n| self.nodes[n].tag == name) {
            if pos > 0 {
                self.stack.truncate(pos);
            }
        }
    }

    fn text(&mut self, raw: &str) {
        if raw.trim().is_empty() {
            let top = self.top();
            if top != 0 && Some(top) != self.head {
                self.texts[top].push_str(raw);
            }
            return;
        }
        if self.top() == 0 || Some(self.top()) == self.head {
            self.ensure_body();
        }
        let top = self.top();
        self.texts[top].push_str(&decode_entities(raw));
    }

    fn finish(mut self) -> DomTree {
        for i in 0..self.nodes.len() {
            if !self.has_children[i] {
                let text = std::mem::take(&mut self.texts[i]);
                if !text.trim().is_empty() {
                    self.nodes[i].leaf_text = Some(text);
                }
            }
        }
        // Subscripts: count of earlier siblings sharing the tag.
        let mut seen: std::collections::HashMap<(usize, &str), usize> = Default::default();
        let mut subs = vec![0; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                let count = seen.entry((p, node.tag.as_str())).or_insert(0);
                subs[i] = *count;
                *count += 1;
            }
        }
        for (node, s) in self.nodes.iter_mut().zip(subs) {
            node.subscript = s;
        }
        DomTree {
            nodes: self.nodes,
            root_index: 0,
        }
    }
}

/// Parse cleaned HTML into a tree rooted at `html`.
pub fn parse_dom(cleaned: &str) -> Result<DomTree> {
    if cleaned.trim().is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut builder = TreeBuilder::new();
    for token in tokenize_html(cleaned) {
        match token {
            Token::Text(t) => builder.text(t),
            Token::Start { name, self_closing } => builder.start(name, self_closing),
            Token::End { name } => builder.end(&name),
        }
    }
    Ok(builder.finish())
}

/// Leaf texts in document order, each trimmed, joined by single spaces.
pub fn extract_text(tree: &DomTree) -> String {
    tree.nodes
        .iter()
        .filter_map(|n| n.leaf_text.as_deref())
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Root-to-node `(tag, subscript)` path, keeping the last `max_depth` units and
/// clamping subscripts to `subscript_table - 1`.
pub fn xpath_units(tree: &DomTree, node: usize, limits: XPathLimits) -> Result<XPathUnits> {
    if node >= tree.nodes.len() {
        return Err(Error::IndexOutOfRange {
            index: node,
            len: tree.nodes.len(),
        });
    }
    let max_sub = limits.subscript_table.saturating_sub(1);
    let mut units = Vec::new();
    let mut cur = Some(node);
    while let Some(i) = cur {
        let n = &tree.nodes[i];
        units.push(XPathUnit::new(n.tag.clone(), n.subscript.min(max_sub)));
        cur = n.parent;
    }
    units.reverse();
    if units.len() > limits.max_depth {
        units.drain(..units.len() - limits.max_depth);
    }
    Ok(XPathUnits { units })
}

pub fn build_edge_list(tree: &DomTree) -> EdgeList {
    let mut edges = Vec::with_capacity(2 * tree.nodes.len().saturating_sub(1));
    for (child, node) in tree.nodes.iter().enumerate() {
        if let Some(parent) = node.parent {
            edges.push((parent, child));
            edges.push((child, parent));
        }
    }
    EdgeList { edges }
}

/// Full extraction pipeline for one page.
pub fn page_to_record(
    id: impl Into<String>,
    raw: &str,
    label: impl Into<String>,
    limits: XPathLimits,
) -> Result<PageRecord> {
    let tree = parse_dom(&clean_html(raw))?;
    let tokens = tokenize(&extract_text(&tree));
    let nodes = (0..tree.len())
        .map(|i| xpath_units(&tree, i, limits))
        .collect::<Result<Vec<_>>>()?;
    Ok(PageRecord {
        id: id.into(),
        label: label.into(),
        tokens,
        nodes,
        edges: build_edge_list(&tree),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(tree: &DomTree) -> Vec<&str> {
        tree.nodes.iter().map(|n| n.tag.as_str()).collect()
    }

    #[test]
    fn clean_removes_script_and_comments() {
        assert_eq!(
            clean_html("<body><script>x=1</script><p>Hi</p></body>"),
            "<body><p>Hi</p></body>"
        );
        assert_eq!(clean_html("<p>a<!-- c -->b</p>"), "<p>ab</p>");
        assert_eq!(clean_html("<p>Hi</p>"), "<p>Hi</p>");
    }

    #[test]
    fn clean_handles_case_attributes_and_unterminated() {
        assert_eq!(
            clean_html("a<SCRIPT type=\"x\">if (a < b) {}</Script >b"),
            "ab"
        );
        assert_eq!(clean_html("a<style>p{}"), "a");
        assert_eq!(clean_html("a<!-- open"), "a");
        assert_eq!(clean_html("<scripts>x</scripts>"), "<scripts>x</scripts>");
        assert_eq!(clean_html("<noscript><p>no</p></noscript>ok"), "ok");
        assert_eq!(clean_html("<iframe src=a></iframe>é"), "é");
    }

    #[test]
    fn parse_full_document() {
        let t = parse_dom("<html><body><p>Hi</p></body></html>").unwrap();
        assert_eq!(tags(&t), ["html", "body", "p"]);
        assert_eq!(t.nodes[2].leaf_text.as_deref(), Some("Hi"));
        assert_eq!(t.nodes[0].leaf_text, None);
    }

    #[test]
    fn parse_synthesizes_wrappers() {
        let t = parse_dom("<p>Hi").unwrap();
        assert_eq!(tags(&t), ["html", "body", "p"]);
        assert_eq!(t.nodes[1].parent, Some(0));
        assert_eq!(t.nodes[2].parent, Some(1));
    }

    #[test]
    fn parse_empty_is_error() {
        assert!(matches!(parse_dom("   "), Err(Error::EmptyDocument)));
        assert!(matches!(parse_dom(""), Err(Error::EmptyDocument)));
    }

    #[test]
    fn parse_ignores_stray_close_and_autocloses() {
        let t = parse_dom("<div><span>a</div></em><p>b").unwrap();
        assert_eq!(tags(&t), ["html", "body", "div", "span", "p"]);
        assert_eq!(t.nodes[4].parent, Some(1));
    }

    #[test]
    fn void_elements_take_no_children() {
        let t = parse_dom("<div><br><img src=x><span>t</span></div>").unwrap();
        assert_eq!(tags(&t), ["html", "body", "div", "br", "img", "span"]);
        for i in 3..6 {
            assert_eq!(t.nodes[i].parent, Some(2));
        }
    }

    #[test]
    fn head_content_goes_to_head() {
        let t = parse_dom("<title>T</title><meta charset=utf-8><p>x</p>").unwrap();
        assert_eq!(tags(&t), ["html", "head", "title", "meta", "body", "p"]);
        assert_eq!(t.nodes[2].leaf_text.as_deref(), Some("T"));
        assert_eq!(t.nodes[4].parent, Some(0));
    }

    #[test]
    fn sibling_list_items_autoclose() {
        let t = parse_dom("<ul><li>a<li>b</ul>").unwrap();
        assert_eq!(tags(&t), ["html", "body", "ul", "li", "li"]);
        assert_eq!(t.nodes[4].parent, Some(2));
        assert_eq!(t.nodes[4].subscript, 1);
    }

    #[test]
    fn mixed_content_keeps_only_leaf_text() {
        let t = parse_dom("<div>lost <b>kept</b></div>").unwrap();
        assert_eq!(extract_text(&t), "kept");
    }

    #[test]
    fn entities_are_decoded() {
        let t = parse_dom("<p>a &amp; b &#65;&#x42; &bogus;</p>").unwrap();
        assert_eq!(t.nodes[2].leaf_text.as_deref(), Some("a & b AB &bogus;"));
    }

    #[test]
    fn attributes_with_gt_inside_quotes() {
        let t = parse_dom("<a title=\"x > y\">link</a>").unwrap();
        assert_eq!(tags(&t), ["html", "body", "a"]);
        assert_eq!(t.nodes[2].leaf_text.as_deref(), Some("link"));
    }

    #[test]
    fn bare_lt_is_text() {
        let t = parse_dom("<p>1 < 2</p>").unwrap();
        assert_eq!(t.nodes[2].leaf_text.as_deref(), Some("1 < 2"));
    }

    #[test]
    fn html_only_is_single_node() {
        let t = parse_dom("<!DOCTYPE html><html></html>").unwrap();
        assert_eq!(t.len(), 1);
        assert!(build_edge_list(&t).edges.is_empty());
        assert_eq!(extract_text(&t), "");
    }

    fn tree_with_leaves(texts: &[&str]) -> DomTree {
        let mut nodes = vec![DomNode {
            tag: "html".into(),
            parent: None,
            subscript: 0,
            leaf_text: None,
        }];
        for (i, t) in texts.iter().enumerate() {
            nodes.push(DomNode {
                tag: "p".into(),
                parent: Some(0),
                subscript: i,
                leaf_text: Some(t.to_string()),
            });
        }
        DomTree {
            nodes,
            root_index: 0,
        }
    }

    #[test]
    fn extract_text_join_and_trim() {
        assert_eq!(
            extract_text(&tree_with_leaves(&["Hello", "World"])),
            "Hello World"
        );
        assert_eq!(extract_text(&tree_with_leaves(&[])), "");
        assert_eq!(extract_text(&tree_with_leaves(&[" a "])), "a");
    }

    #[test]
    fn xpath_of_root() {
        let t = parse_dom("<p>x</p>").unwrap();
        let u = xpath_units(&t, 0, XPathLimits::default()).unwrap();
        assert_eq!(u.units, vec![XPathUnit::new("html", 0)]);
    }

    #[test]
    fn xpath_second_div() {
        // Hand-built: html, body, div, div, p (in 2nd div), span.
        let t = parse_dom("<body><div></div><div><p>x</p></div><span></span></body>").unwrap();
        assert_eq!(tags(&t), ["html", "body", "div", "div", "p", "span"]);
        let u = xpath_units(&t, 4, XPathLimits::default()).unwrap();
        assert_eq!(
            u.units,
            vec![
                XPathUnit::new("html", 0),
                XPathUnit::new("body", 0),
                XPathUnit::new("div", 1),
                XPathUnit::new("p", 0),
            ]
        );
    }

    #[test]
    fn xpath_truncates_deep_chain() {
        let html = "<div>".repeat(20);
        let t = parse_dom(&html).unwrap();
        let deepest = t.len() - 1;
        assert_eq!(t.depth(deepest), 21);
        let u = xpath_units(&t, deepest, XPathLimits::default()).unwrap();
        assert_eq!(u.len(), 15);
        assert!(u.units.iter().all(|x| x.tag == "div"));
    }

    #[test]
    fn xpath_clamps_subscripts() {
        let html = "<span></span>".repeat(70);
        let t = parse_dom(&html).unwrap();
        let last = xpath_units(&t, t.len() - 1, XPathLimits::default()).unwrap();
        assert_eq!(last.units.last().unwrap().subscript, 63);
    }

    #[test]
    fn xpath_bad_index() {
        let t = parse_dom("<p>x</p>").unwrap();
        assert!(matches!(
            xpath_units(&t, 3, XPathLimits::default()),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn edges_for_chain_and_fanout() {
        let chain = parse_dom("<p>x</p>").unwrap();
        assert_eq!(
            build_edge_list(&chain).edges,
            vec![(0, 1), (1, 0), (1, 2), (2, 1)]
        );
        let fan = parse_dom("<body><p>a</p><p>b</p></body>").unwrap();
        assert_eq!(fan.len(), 4);
        assert_eq!(build_edge_list(&fan).edges.len(), 6);
    }

    #[test]
    fn record_from_minimal_page() {
        let r = page_to_record("p0", "<p>Hi</p>", "0", XPathLimits::default()).unwrap();
        assert_eq!(r.nodes.len(), 3);
        assert_eq!(r.tokens, vec!["hi"]);
        assert_eq!(r.edges.edges.len(), 4);
        let again = page_to_record("p0", "<p>Hi</p>", "0", XPathLimits::default()).unwrap();
        assert_eq!(r, again);
        assert!(matches!(
            page_to_record("p1", " \n ", "0", XPathLimits::default()),
            Err(Error::EmptyDocument)
        ));
    }
}
