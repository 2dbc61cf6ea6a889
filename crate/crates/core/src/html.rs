//! Tolerant HTML parsing shared by discovery and policy analysis.
//!
//! Real-world policy pages are full of unclosed tags, nested templates and
//! script soup, so everything goes through a browser-grade parser rather
//! than regexes. Two views of a document matter here: its links (for
//! finding the policy page) and its visible text broken into paragraphs
//! (for analyzing the policy itself).

use std::collections::HashSet;
use std::sync::LazyLock;

use scraper::node::Node;
use scraper::{Html, Selector};

/// Elements whose entire subtree is invisible page chrome or code, never
/// policy prose.
static SKIPPED: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    [
        "script", "style", "noscript", "template", "head", "nav", "header", "footer", "svg",
        "iframe",
    ]
    .into_iter()
    .collect()
});

/// Elements that start and end a paragraph of visible text. `br` is treated
/// as a boundary too: address blocks in policies lean on it.
static BLOCK: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    [
        "p", "div", "section", "article", "main", "aside", "li", "ul", "ol", "table", "thead",
        "tbody", "tr", "td", "th", "h1", "h2", "h3", "h4", "h5", "h6", "blockquote", "pre",
        "form", "fieldset", "dl", "dt", "dd", "figure", "figcaption", "hr", "br", "body",
    ]
    .into_iter()
    .collect()
});

/// A hyperlink found in a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    /// Visible anchor text, whitespace-collapsed.
    pub text: String,
    /// The raw href attribute.
    pub href: String,
    /// Absolute http(s) URL after resolution against the page URL, when the
    /// href denotes a fetchable page at all.
    pub resolved: Option<String>,
}

/// Extracts every anchor from `html`, resolving hrefs against `base_url`.
pub fn links(html: &str, base_url: &str) -> Vec<Link> {
    let document = Html::parse_document(html);
    let selector = Selector::parse("a[href]").expect("static selector parses");
    let base = url::Url::parse(base_url).ok();

    let mut out = Vec::new();
    for element in document.select(&selector) {
        let href = element.value().attr("href").unwrap_or_default().trim();
        if href.is_empty() {
            continue;
        }
        let text = collapse(element.text().collect::<String>().as_str());
        let resolved = base.as_ref().and_then(|b| resolve_href(b, href));
        out.push(Link {
            text,
            href: href.to_string(),
            resolved,
        });
    }
    out
}

fn resolve_href(base: &url::Url, href: &str) -> Option<String> {
    // Pseudo-links never lead to a page.
    let lowered = href.to_ascii_lowercase();
    for scheme in ["javascript:", "mailto:", "tel:", "data:"] {
        if lowered.starts_with(scheme) {
            return None;
        }
    }
    if href.starts_with('#') {
        return None;
    }
    let mut resolved = base.join(href).ok()?;
    if !matches!(resolved.scheme(), "http" | "https") {
        return None;
    }
    resolved.set_fragment(None);
    Some(resolved.to_string())
}

/// The document title, whitespace-collapsed.
pub fn title(html: &str) -> Option<String> {
    let document = Html::parse_document(html);
    let selector = Selector::parse("title").expect("static selector parses");
    document
        .select(&selector)
        .next()
        .map(|t| collapse(t.text().collect::<String>().as_str()))
        .filter(|t| !t.is_empty())
}

/// Visible text content split into paragraphs.
///
/// Chrome subtrees (navigation, headers, footers, scripts) are dropped
/// entirely; block-level boundaries split paragraphs; whitespace inside a
/// paragraph collapses to single spaces.
pub fn paragraphs(html: &str) -> Vec<String> {
    let document = Html::parse_document(html);
    let mut out = Vec::new();
    let mut current = String::new();
    walk(document.tree.root(), &mut out, &mut current);
    flush(&mut current, &mut out);
    out
}

/// Paragraphs of a plain-text document: blocks separated by blank lines.
pub fn paragraphs_from_text(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut current, &mut out);
        } else {
            current.push_str(line);
            current.push(' ');
        }
    }
    flush(&mut current, &mut out);
    out
}

fn walk(node: ego_tree::NodeRef<'_, Node>, out: &mut Vec<String>, current: &mut String) {
    match node.value() {
        Node::Text(text) => {
            current.push_str(text);
        }
        Node::Element(element) => {
            let name = element.name();
            if SKIPPED.contains(name) {
                return;
            }
            let is_block = BLOCK.contains(name);
            if is_block {
                flush(current, out);
            }
            for child in node.children() {
                walk(child, out, current);
            }
            if is_block {
                flush(current, out);
            }
        }
        Node::Document | Node::Fragment => {
            for child in node.children() {
                walk(child, out, current);
            }
        }
        _ => {}
    }
}

fn flush(current: &mut String, out: &mut Vec<String>) {
    let paragraph = collapse(current);
    current.clear();
    if !paragraph.is_empty() {
        out.push(paragraph);
    }
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
