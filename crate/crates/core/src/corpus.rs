//! Seeded synthetic HTML generators for tests, benchmarks and demos.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dom::{page_to_record, XPathLimits};
use crate::error::Result;
use crate::harness::dataset::Dataset;

/// A generated page before extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPage {
    pub id: String,
    pub label: String,
    pub html: String,
}

const WORDS_A: &[&str] = &[
    "river", "forest", "mountain", "valley", "meadow", "glacier", "canyon", "island", "harbor",
    "lagoon", "prairie", "summit", "delta", "marsh", "ridge", "coast", "tundra", "savanna", "reef",
    "cliff", "grove", "brook", "dune", "fjord",
];

const WORDS_B: &[&str] = &[
    "invoice", "ledger", "budget", "revenue", "dividend", "audit", "equity", "payroll", "tariff",
    "mortgage", "credit", "pension", "asset", "margin", "bond", "futures", "broker", "surplus",
    "deficit", "fiscal", "hedge", "yield", "capital", "treasury",
];

fn pick_words(rng: &mut impl Rng, pool: &[&str], count: usize) -> Vec<String> {
    (0..count)
        .map(|_| pool[rng.gen_range(0..pool.len())].to_string())
        .collect()
}

/// Deal `words` across `slots` leaves in order, as evenly as possible.
fn deal(words: &[String], slots: usize) -> Vec<String> {
    let mut out = vec![String::new(); slots];
    for (i, w) in words.iter().enumerate() {
        let s = &mut out[i * slots / words.len().max(1)];
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(w);
    }
    out
}

/// Deeply nested `div`/`ul` layout; `leaves` is the number of text slots.
fn nested_layout(rng: &mut impl Rng, texts: &[String]) -> String {
    let depth = rng.gen_range(4..=6);
    let mut html = String::from("<html><head><title>page</title></head><body>");
    for d in 0..depth {
        let _ = write!(html, "<div class=\"level{d}\">");
    }
    html.push_str("<ul>");
    for t in texts {
        let _ = write!(html, "<li><div><span>{t}</span></div></li>");
    }
    html.push_str("</ul>");
    for _ in 0..depth {
        html.push_str("</div>");
    }
    html.push_str("</body></html>");
    html
}

/// Flat table layout with two cells per row.
fn table_layout(texts: &[String]) -> String {
    let mut html = String::from("<html><head><title>page</title></head><body><table>");
    for pair in texts.chunks(2) {
        html.push_str("<tr>");
        for t in pair {
            let _ = write!(html, "<td>{t}</td>");
        }
        html.push_str("</tr>");
    }
    html.push_str("</table></body></html>");
    html
}

/// Two classes separable by both text and structure: `nested` pages use a
/// deep `div`/`ul` layout with nature words, `tabular` pages a flat table
/// with finance words. Classes alternate, `per_class` pages each.
pub fn separable_corpus(per_class: usize, seed: u64) -> Vec<SyntheticPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pages = Vec::with_capacity(per_class * 2);
    for i in 0..per_class {
        let n = rng.gen_range(12..=24);
        let words = pick_words(&mut rng, WORDS_A, n);
        let slots = rng.gen_range(3..=6);
        let html = nested_layout(&mut rng, &deal(&words, slots));
        pages.push(SyntheticPage {
            id: format!("nested-{i:03}"),
            label: "nested".into(),
            html,
        });
        let n = rng.gen_range(12..=24);
        let words = pick_words(&mut rng, WORDS_B, n);
        let slots = 2 * rng.gen_range(2..=4);
        pages.push(SyntheticPage {
            id: format!("tabular-{i:03}"),
            label: "tabular".into(),
            html: table_layout(&deal(&words, slots)),
        });
    }
    pages
}

/// Classes differ only in layout. Pages come in pairs, one `nested` and one
/// `tabular`, built from the same shuffled word multiset.
pub fn structure_only_corpus(pairs: usize, seed: u64) -> Vec<SyntheticPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<&str> = WORDS_A.iter().chain(WORDS_B).copied().collect();
    let mut pages = Vec::with_capacity(pairs * 2);
    for i in 0..pairs {
        let n = rng.gen_range(12..=24);
        let mut words = pick_words(&mut rng, &pool, n);
        let slots = rng.gen_range(3..=6);
        let html = nested_layout(&mut rng, &deal(&words, slots));
        pages.push(SyntheticPage {
            id: format!("nested-{i:03}"),
            label: "nested".into(),
            html,
        });
        words.shuffle(&mut rng);
        let slots = 2 * rng.gen_range(2..=4);
        pages.push(SyntheticPage {
            id: format!("tabular-{i:03}"),
            label: "tabular".into(),
            html: table_layout(&deal(&words, slots)),
        });
    }
    pages
}

/// Classes differ only in vocabulary. Every page has the same fixed table
/// layout; `nature` pages draw words from one pool, `finance` from another.
pub fn text_only_corpus(pairs: usize, seed: u64) -> Vec<SyntheticPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pages = Vec::with_capacity(pairs * 2);
    for i in 0..pairs {
        for (label, pool) in [("nature", WORDS_A), ("finance", WORDS_B)] {
            let n = rng.gen_range(12..=24);
            let words = pick_words(&mut rng, pool, n);
            pages.push(SyntheticPage {
                id: format!("{label}-{i:03}"),
                label: label.into(),
                html: table_layout(&deal(&words, 6)),
            });
        }
    }
    pages
}

/// Extract every page into a dataset.
pub fn to_dataset(pages: &[SyntheticPage], limits: XPathLimits) -> Result<Dataset> {
    let records = pages
        .iter()
        .map(|p| page_to_record(&p.id, &p.html, &p.label, limits))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(records))
}

const FUZZ_TAGS: &[&str] = &[
    "div", "p", "span", "a", "ul", "li", "table", "tr", "td", "th", "br", "img", "input", "hr",
    "b", "i", "option", "select", "dt", "dd", "html", "body", "head", "title", "meta", "script",
    "style", "iframe", "noscript", "x-custom", "svg", "form", "h1", "section",
];

const FUZZ_SNIPPETS: &[&str] = &[
    "&amp;",
    "&lt;",
    "&#65;",
    "&#x263a;",
    "&bogus;",
    "&",
    "<",
    ">",
    "<!--",
    "-->",
    "<!DOCTYPE html>",
    "</",
    "<>",
    "< div>",
    "=\"",
    "'",
    "\u{feff}",
    "\r\n",
    "\t",
    "é",
    "中文",
    "<![CDATA[x]]>",
];

/// One random tag-soup document: unbalanced, misnested and truncated markup
/// mixed with entities, comments and stray characters.
pub fn fuzz_html(rng: &mut impl Rng) -> String {
    let mut s = String::new();
    let pieces = rng.gen_range(0..60);
    for _ in 0..pieces {
        match rng.gen_range(0..10) {
            0..=2 => {
                let tag = FUZZ_TAGS[rng.gen_range(0..FUZZ_TAGS.len())];
                let _ = write!(s, "<{tag}");
                if rng.gen_bool(0.3) {
                    let _ = write!(s, " class=\"c{}\"", rng.gen_range(0..9));
                }
                if rng.gen_bool(0.1) {
                    s.push_str(" data-x='unterminated");
                }
                s.push_str(if rng.gen_bool(0.1) { "/>" } else { ">" });
            }
            3..=4 => {
                let tag = FUZZ_TAGS[rng.gen_range(0..FUZZ_TAGS.len())];
                let _ = write!(s, "</{tag}>");
            }
            5..=7 => {
                let words = rng.gen_range(0..4);
                for _ in 0..words {
                    let pool = if rng.gen_bool(0.5) { WORDS_A } else { WORDS_B };
                    let _ = write!(s, "{} ", pool[rng.gen_range(0..pool.len())]);
                }
            }
            8 => s.push_str(FUZZ_SNIPPETS[rng.gen_range(0..FUZZ_SNIPPETS.len())]),
            _ => {
                let len = rng.gen_range(0..6);
                for _ in 0..len {
                    s.push(char::from_u32(rng.gen_range(0x20..0x2000)).unwrap_or('?'));
                }
            }
        }
    }
    if rng.gen_bool(0.2) {
        let cut = rng.gen_range(0..=s.len());
        let cut = (0..=cut)
            .rev()
            .find(|&i| s.is_char_boundary(i))
            .unwrap_or(0);
        s.truncate(cut);
    }
    s
}
