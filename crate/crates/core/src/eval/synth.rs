//! Synthetic HTML-like pages of a requested size.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::tree::{LabeledTree, NodeId, TreeBuilder};

const CONTAINERS: &[&str] = &["div", "div", "div", "section", "ul", "article", "nav", "table", "form"];
const LEAVES: &[&str] = &["p", "span", "a", "img", "li", "h2", "h3", "input", "button", "em", "td"];
const WORDS: &[&str] = &[
    "header", "footer", "main", "content", "sidebar", "nav", "menu", "item", "list", "card", "title", "body",
    "link", "button", "primary", "secondary", "active", "hidden", "row", "col", "grid", "wrapper", "inner",
    "outer", "left", "right", "top", "bottom", "small", "large", "media", "image", "text", "label", "form",
    "field", "input", "search", "result", "page", "post", "comment", "author", "date", "tag", "share", "social",
    "icon", "logo", "banner", "promo", "news", "feed", "video", "player", "thumb", "meta", "info", "alert",
    "modal", "dialog", "close", "open", "toggle", "panel", "tab", "pane", "section", "block", "widget",
];

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let k = rng.random_range(lo..=hi);
    (0..k).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

/// `k` in bijective base 26 (`a`, ..., `z`, `aa`, ...); the tokenizer keeps
/// letter runs only, so page-specific names must not use digits.
fn letters(mut k: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (k % 26) as u8);
        if k < 26 {
            break;
        }
        k = k / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Builds a page with exactly `n_nodes` elements (at least 3) whose shape and
/// attribute vocabulary loosely follow real documents. Deterministic in `seed`.
///
/// Fan-out stays bounded and class names follow a Zipf law over a vocabulary
/// that grows with the page, so large pages look like many components rather
/// than one long sibling list over a fixed set of names.
pub fn synthetic_page(n_nodes: usize, seed: u64) -> LabeledTree {
    let n_nodes = n_nodes.max(3);
    let mut g = Generator {
        rng: ChaCha8Rng::seed_from_u64(seed),
        b: TreeBuilder::default(),
        classes: Zipf::new((n_nodes / 4).max(WORDS.len()) as f64, 1.0).expect("valid vocabulary"),
        next_id: 0,
    };
    let html = g.b.push(None, "html".into(), Vec::new(), None, None);
    g.b.push(Some(html), "head".into(), Vec::new(), None, None);
    let body = g.b.push(Some(html), "body".into(), Vec::new(), None, None);
    g.fill(body, 2, n_nodes - 3);
    g.b.finish().expect("page has a root")
}

struct Generator {
    rng: ChaCha8Rng,
    b: TreeBuilder,
    /// Class-name ranks; the vocabulary grows with the page.
    classes: Zipf<f64>,
    next_id: usize,
}

impl Generator {
    /// Ranks below the base vocabulary are plain words, later ones compounds
    /// such as `cardbq`.
    fn class_word(&mut self) -> String {
        let rank = self.classes.sample(&mut self.rng) as usize - 1;
        let w = WORDS[rank % WORDS.len()];
        match rank / WORDS.len() {
            0 => w.to_owned(),
            k => format!("{w}{}", letters(k - 1)),
        }
    }

    fn attributes(&mut self, tag: &str) -> Vec<(String, String)> {
        let mut attributes = Vec::new();
        if self.rng.random_bool(0.7) {
            let k = self.rng.random_range(1..=3);
            let class = (0..k).map(|_| self.class_word()).collect::<Vec<_>>().join(" ");
            attributes.push(("class".to_owned(), class));
        }
        if self.rng.random_bool(0.15) {
            self.next_id += 1;
            attributes.push(("id".to_owned(), format!("{}-{}", words(&mut self.rng, 1, 1), letters(self.next_id))));
        }
        if tag == "a" {
            attributes.push(("href".to_owned(), format!("/{}", words(&mut self.rng, 1, 3).replace(' ', "/"))));
        }
        attributes
    }

    /// Adds exactly `budget` descendants under `parent`, in pre-order.
    fn fill(&mut self, parent: NodeId, depth: usize, budget: usize) {
        if budget == 0 {
            return;
        }
        let wide = self.rng.random_bool(0.15);
        let fan_out = if wide { self.rng.random_range(5..=20) } else { self.rng.random_range(2..=8) };
        let k = fan_out.min(budget);
        let mut extra = budget - k;
        let mut containers: Vec<bool> = (0..k).map(|_| depth < 30 && self.rng.random_bool(0.4)).collect();
        if extra > 0 && !containers.contains(&true) {
            let i = self.rng.random_range(0..k);
            containers[i] = true;
        }
        let weights: Vec<f64> = containers
            .iter()
            .map(|&c| if c { self.rng.random_range(0.2..1.0) } else { 0.0 })
            .collect();
        let mut left: f64 = weights.iter().sum();
        for (i, &container) in containers.iter().enumerate() {
            let share = if container && left > 0.0 {
                let s = ((extra as f64) * weights[i] / left).round() as usize;
                left -= weights[i];
                let s = if left <= 0.0 { extra } else { s.min(extra) };
                extra -= s;
                s
            } else {
                0
            };
            let tag = if container {
                *CONTAINERS.choose(&mut self.rng).expect("non-empty")
            } else {
                *LEAVES.choose(&mut self.rng).expect("non-empty")
            };
            let attributes = self.attributes(tag);
            let text = (!container && self.rng.random_bool(0.6)).then(|| words(&mut self.rng, 1, 6));
            let id = self.b.push(Some(parent), tag.to_owned(), attributes, text, None);
            self.fill(id, depth + 1, share);
        }
    }
}
