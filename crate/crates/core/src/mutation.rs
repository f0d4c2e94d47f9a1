//! Ground-truth-labeled mutants.
//!
//! Every source node gets an opaque signature. Mutations edit a mutable copy
//! of the tree; nodes they create carry no signature, so after mutation two
//! nodes correspond exactly when they share a signature.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tree::{FormatError, LabeledTree, NodeId, TreeBuilder, parse_tree_json, serialize_tree_json};

pub const SOURCE_FILE: &str = "source.html.json";
pub const MUTANT_FILE: &str = "mutant.html.json";
pub const LOG_FILE: &str = "mutations.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    RemoveNode,
    Duplicate,
    Wrap,
    Unwrap,
    Swap,
    AttrRemove,
    AttrRemoveWords,
    ContentReplaceRandom,
    ContentChangeLetters,
    ContentRemove,
    ContentRemoveWords,
}

impl MutationKind {
    pub const ALL: [MutationKind; 11] = [
        MutationKind::RemoveNode,
        MutationKind::Duplicate,
        MutationKind::Wrap,
        MutationKind::Unwrap,
        MutationKind::Swap,
        MutationKind::AttrRemove,
        MutationKind::AttrRemoveWords,
        MutationKind::ContentReplaceRandom,
        MutationKind::ContentChangeLetters,
        MutationKind::ContentRemove,
        MutationKind::ContentRemoveWords,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationDetail {
    None,
    /// Signatures deleted with a removed subtree, target included.
    Removed { signatures: Vec<String> },
    Partner { signature: String },
    Attribute { name: String, before: String, after: Option<String> },
    Text { before: String, after: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationOp {
    pub kind: MutationKind,
    pub target: String,
    pub detail: MutationDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationLog {
    pub source_page: String,
    pub seed: u64,
    pub ratio: f64,
    pub ops: Vec<MutationOp>,
    /// Source signatures with no counterpart in the mutant.
    pub removed_signatures: BTreeSet<String>,
}

/// Mutation magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationConfig {
    /// Share of a text's letters rewritten by `content_change_letters`.
    pub change_letters_fraction: f64,
    /// Share of words dropped by `content_remove_words` and `attr_remove_words`.
    pub remove_words_fraction: f64,
    /// Random draws per kind before falling back to a full scan.
    pub rejection_tries: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            change_letters_fraction: 0.1,
            remove_words_fraction: 0.3,
            rejection_tries: 32,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MutationError {
    #[error("mutation ratio must lie in [0, 0.5], got {0}")]
    Ratio(f64),
    #[error("source tree is not signed")]
    Unsigned,
    #[error("no eligible target left after mutating {mutated} of {wanted} nodes")]
    ExhaustedTargets { mutated: usize, wanted: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("signature {0} appears twice in one tree")]
pub struct DuplicateSignature(pub String);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Gives every node a distinct 16-hex-digit signature derived from `seed`.
pub fn assign_signatures(tree: &LabeledTree, seed: u64) -> LabeledTree {
    // splitmix64 is a bijection, so distinct ids give distinct signatures.
    tree.with_signatures(|id| Some(format!("{:016x}", splitmix64(seed.wrapping_add(u64::from(id.0))))))
}

/// Pairs of nodes sharing a signature.
pub fn ground_truth(
    source: &LabeledTree,
    mutant: &LabeledTree,
) -> Result<Vec<(NodeId, NodeId)>, DuplicateSignature> {
    let mut by_sig = HashMap::new();
    for node in source.nodes() {
        if let Some(sig) = &node.signature
            && by_sig.insert(sig.as_str(), node.id).is_some()
        {
            return Err(DuplicateSignature(sig.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for node in mutant.nodes() {
        if let Some(sig) = &node.signature {
            if !seen.insert(sig.as_str()) {
                return Err(DuplicateSignature(sig.clone()));
            }
            if let Some(&n) = by_sig.get(sig.as_str()) {
                pairs.push((n, node.id));
            }
        }
    }
    pairs.sort();
    Ok(pairs)
}

#[derive(Debug, Clone)]
struct Slot {
    tag: String,
    attributes: Vec<(String, String)>,
    text: Option<String>,
    signature: Option<String>,
    parent: Option<usize>,
    children: Vec<usize>,
    alive: bool,
    mutated: bool,
}

impl Slot {
    fn candidate(&self) -> bool {
        self.alive && !self.mutated && self.signature.is_some()
    }
}

struct Arena {
    slots: Vec<Slot>,
}

impl Arena {
    fn new(tree: &LabeledTree) -> Self {
        let slots = tree
            .nodes()
            .iter()
            .map(|n| Slot {
                tag: n.tag.clone(),
                attributes: n.attributes.clone(),
                text: n.text.clone(),
                signature: n.signature.clone(),
                parent: n.parent.map(NodeId::index),
                children: n.children.iter().map(|c| c.index()).collect(),
                alive: true,
                mutated: false,
            })
            .collect();
        Arena { slots }
    }

    fn subtree(&self, root: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend(self.slots[i].children.iter().rev());
        }
        out
    }

    fn position(&self, i: usize) -> (usize, usize) {
        let parent = self.slots[i].parent.expect("structural targets are never the root");
        let pos = self.slots[parent]
            .children
            .iter()
            .position(|&c| c == i)
            .expect("child is listed by its parent");
        (parent, pos)
    }

    fn swap_partners(&self, i: usize) -> Vec<usize> {
        match self.slots[i].parent {
            Some(p) => self.slots[p]
                .children
                .iter()
                .copied()
                .filter(|&c| c != i && self.slots[c].candidate())
                .collect(),
            None => Vec::new(),
        }
    }

    /// Distinct not-yet-mutated source nodes the op would consume, or `None`
    /// if `i` is not a valid target of `kind`.
    fn footprint(&self, kind: MutationKind, i: usize) -> Option<usize> {
        let slot = &self.slots[i];
        if !slot.candidate() {
            return None;
        }
        let root = slot.parent.is_none();
        let ok = match kind {
            MutationKind::RemoveNode => {
                if root {
                    return None;
                }
                return Some(self.subtree(i).into_iter().filter(|&j| self.slots[j].candidate()).count());
            }
            MutationKind::Duplicate | MutationKind::Wrap => !root,
            MutationKind::Unwrap => !root && !slot.children.is_empty(),
            MutationKind::Swap => {
                return (!root && !self.swap_partners(i).is_empty()).then_some(2);
            }
            MutationKind::AttrRemove => !slot.attributes.is_empty(),
            MutationKind::AttrRemoveWords => slot.attributes.iter().any(|(_, v)| v.split_whitespace().nth(1).is_some()),
            MutationKind::ContentReplaceRandom | MutationKind::ContentRemove => slot.text.is_some(),
            MutationKind::ContentChangeLetters => slot.text.as_deref().is_some_and(|t| t.bytes().any(|b| b.is_ascii_alphabetic())),
            MutationKind::ContentRemoveWords => slot.text.as_deref().is_some_and(|t| t.split_whitespace().nth(1).is_some()),
        };
        ok.then_some(1)
    }

    fn into_tree(self) -> LabeledTree {
        let mut builder = TreeBuilder::default();
        let mut slots = self.slots;
        let mut stack = vec![(0usize, None)];
        while let Some((i, parent)) = stack.pop() {
            let slot = &mut slots[i];
            let id = builder.push(
                parent,
                std::mem::take(&mut slot.tag),
                std::mem::take(&mut slot.attributes),
                slot.text.take(),
                slot.signature.take(),
            );
            for &c in slots[i].children.iter().rev() {
                stack.push((c, Some(id)));
            }
        }
        builder.finish().expect("arena root is always alive")
    }
}

fn drop_words(text: &str, fraction: f64, rng: &mut ChaCha8Rng) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let k = words.len();
    let remove = ((fraction * k as f64).round() as usize).max(1).min(k - 1);
    let gone: BTreeSet<usize> = rand::seq::index::sample(rng, k, remove).into_iter().collect();
    words
        .iter()
        .enumerate()
        .filter(|(i, _)| !gone.contains(i))
        .map(|(_, w)| *w)
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_word(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(3..=8);
    (0..len).map(|_| char::from(rng.random_range(b'a'..=b'z'))).collect()
}

fn change_letters(text: &str, fraction: f64, rng: &mut ChaCha8Rng) -> String {
    let mut bytes = text.as_bytes().to_vec();
    let letters: Vec<usize> = (0..bytes.len()).filter(|&i| bytes[i].is_ascii_alphabetic()).collect();
    let count = ((fraction * letters.len() as f64).round() as usize).clamp(1, letters.len());
    for k in rand::seq::index::sample(rng, letters.len(), count) {
        let i = letters[k];
        let base = if bytes[i].is_ascii_uppercase() { b'A' } else { b'a' };
        // Shift by 1..=25 so the letter always changes.
        let shift = rng.random_range(1..26u8);
        bytes[i] = base + (bytes[i] - base + shift) % 26;
    }
    String::from_utf8(bytes).expect("only ASCII letters were replaced")
}

struct Mutator<'a> {
    arena: Arena,
    rng: ChaCha8Rng,
    config: &'a MutationConfig,
    ops: Vec<MutationOp>,
    removed: BTreeSet<String>,
    mutated: usize,
}

impl Mutator<'_> {
    fn mark(&mut self, i: usize) {
        let slot = &mut self.arena.slots[i];
        if slot.signature.is_some() && !slot.mutated {
            slot.mutated = true;
            self.mutated += 1;
        }
    }

    fn signature(&self, i: usize) -> String {
        self.arena.slots[i].signature.clone().expect("targets are signed")
    }

    /// Uniform eligible target for `kind` within `budget`, if any.
    fn pick(&mut self, kind: MutationKind, budget: usize) -> Option<usize> {
        let n = self.arena.slots.len();
        for _ in 0..self.config.rejection_tries {
            let i = self.rng.random_range(0..n);
            if self.arena.footprint(kind, i).is_some_and(|f| f <= budget) {
                return Some(i);
            }
        }
        let eligible: Vec<usize> = (0..n)
            .filter(|&i| self.arena.footprint(kind, i).is_some_and(|f| f <= budget))
            .collect();
        eligible.choose(&mut self.rng).copied()
    }

    fn apply(&mut self, kind: MutationKind, i: usize) {
        let target = self.signature(i);
        let detail = match kind {
            MutationKind::RemoveNode => {
                let (parent, pos) = self.arena.position(i);
                self.arena.slots[parent].children.remove(pos);
                let mut signatures = Vec::new();
                for j in self.arena.subtree(i) {
                    self.mark(j);
                    let slot = &mut self.arena.slots[j];
                    slot.alive = false;
                    if let Some(sig) = &slot.signature {
                        signatures.push(sig.clone());
                        self.removed.insert(sig.clone());
                    }
                }
                MutationDetail::Removed { signatures }
            }
            MutationKind::Duplicate => {
                let (parent, pos) = self.arena.position(i);
                let copy = self.copy_subtree(i, parent);
                self.arena.slots[parent].children.insert(pos + 1, copy);
                self.mark(i);
                MutationDetail::None
            }
            MutationKind::Wrap => {
                let (parent, pos) = self.arena.position(i);
                let wrapper = self.arena.slots.len();
                self.arena.slots.push(Slot {
                    tag: "div".to_owned(),
                    attributes: Vec::new(),
                    text: None,
                    signature: None,
                    parent: Some(parent),
                    children: vec![i],
                    alive: true,
                    mutated: false,
                });
                self.arena.slots[parent].children[pos] = wrapper;
                self.arena.slots[i].parent = Some(wrapper);
                self.mark(i);
                MutationDetail::None
            }
            MutationKind::Unwrap => {
                let (parent, pos) = self.arena.position(i);
                let children = std::mem::take(&mut self.arena.slots[i].children);
                for &c in &children {
                    self.arena.slots[c].parent = Some(parent);
                }
                self.arena.slots[parent].children.splice(pos..=pos, children);
                self.mark(i);
                self.arena.slots[i].alive = false;
                self.removed.insert(target.clone());
                MutationDetail::None
            }
            MutationKind::Swap => {
                let partners = self.arena.swap_partners(i);
                let j = *partners.choose(&mut self.rng).expect("swap targets have a partner");
                let (parent, pi) = self.arena.position(i);
                let (_, pj) = self.arena.position(j);
                self.arena.slots[parent].children.swap(pi, pj);
                self.mark(i);
                self.mark(j);
                MutationDetail::Partner {
                    signature: self.signature(j),
                }
            }
            MutationKind::AttrRemove => {
                let k = self.rng.random_range(0..self.arena.slots[i].attributes.len());
                let (name, before) = self.arena.slots[i].attributes.remove(k);
                self.mark(i);
                MutationDetail::Attribute { name, before, after: None }
            }
            MutationKind::AttrRemoveWords => {
                let candidates: Vec<usize> = self.arena.slots[i]
                    .attributes
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, v))| v.split_whitespace().nth(1).is_some())
                    .map(|(k, _)| k)
                    .collect();
                let k = *candidates.choose(&mut self.rng).expect("target has a multi-word attribute");
                let (name, before) = self.arena.slots[i].attributes[k].clone();
                let after = drop_words(&before, self.config.remove_words_fraction, &mut self.rng);
                self.arena.slots[i].attributes[k].1 = after.clone();
                self.mark(i);
                MutationDetail::Attribute {
                    name,
                    before,
                    after: Some(after),
                }
            }
            MutationKind::ContentReplaceRandom
            | MutationKind::ContentChangeLetters
            | MutationKind::ContentRemove
            | MutationKind::ContentRemoveWords => {
                let before = self.arena.slots[i].text.clone().expect("content targets have text");
                let after = match kind {
                    MutationKind::ContentReplaceRandom => {
                        let words = before.split_whitespace().count().max(1);
                        Some((0..words).map(|_| random_word(&mut self.rng)).collect::<Vec<_>>().join(" "))
                    }
                    MutationKind::ContentChangeLetters => {
                        Some(change_letters(&before, self.config.change_letters_fraction, &mut self.rng))
                    }
                    MutationKind::ContentRemoveWords => {
                        Some(drop_words(&before, self.config.remove_words_fraction, &mut self.rng))
                    }
                    _ => None,
                };
                self.arena.slots[i].text = after.clone();
                self.mark(i);
                MutationDetail::Text { before, after }
            }
        };
        self.ops.push(MutationOp { kind, target, detail });
    }

    /// Appends an unsigned copy of the subtree at `i` and returns its root.
    fn copy_subtree(&mut self, i: usize, parent: usize) -> usize {
        let root = self.arena.slots.len();
        let mut stack = vec![(i, parent)];
        while let Some((src, new_parent)) = stack.pop() {
            let new = self.arena.slots.len();
            let s = &self.arena.slots[src];
            let slot = Slot {
                tag: s.tag.clone(),
                attributes: s.attributes.clone(),
                text: s.text.clone(),
                signature: None,
                parent: Some(new_parent),
                children: Vec::new(),
                alive: true,
                mutated: false,
            };
            let children = s.children.clone();
            self.arena.slots.push(slot);
            if new != root {
                self.arena.slots[new_parent].children.push(new);
            }
            for c in children.into_iter().rev() {
                stack.push((c, new));
            }
        }
        root
    }
}

/// Applies random mutations until `round(ratio · size)` distinct source nodes
/// have been touched.
pub fn mutate(tree: &LabeledTree, ratio: f64, seed: u64) -> Result<(LabeledTree, MutationLog), MutationError> {
    mutate_with(tree, ratio, seed, &MutationConfig::default())
}

pub fn mutate_with(
    tree: &LabeledTree,
    ratio: f64,
    seed: u64,
    config: &MutationConfig,
) -> Result<(LabeledTree, MutationLog), MutationError> {
    if !(0.0..=0.5).contains(&ratio) {
        return Err(MutationError::Ratio(ratio));
    }
    if tree.nodes().iter().any(|n| n.signature.is_none()) {
        return Err(MutationError::Unsigned);
    }
    let wanted = (ratio * tree.size() as f64).round() as usize;
    let mut m = Mutator {
        arena: Arena::new(tree),
        rng: ChaCha8Rng::seed_from_u64(seed),
        config,
        ops: Vec::new(),
        removed: BTreeSet::new(),
        mutated: 0,
    };
    let mut kinds = MutationKind::ALL.to_vec();
    while m.mutated < wanted {
        if kinds.is_empty() {
            return Err(MutationError::ExhaustedTargets {
                mutated: m.mutated,
                wanted,
            });
        }
        let k = m.rng.random_range(0..kinds.len());
        let kind = kinds[k];
        match m.pick(kind, wanted - m.mutated) {
            Some(i) => m.apply(kind, i),
            None => {
                kinds.remove(k);
            }
        }
    }
    let log = MutationLog {
        source_page: String::new(),
        seed,
        ratio,
        ops: m.ops,
        removed_signatures: m.removed,
    };
    Ok((m.arena.into_tree(), log))
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Tree { path: PathBuf, source: FormatError },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: serde_json::Error },
}

/// A source tree, its mutant and the log that produced it.
#[derive(Debug, Clone)]
pub struct MutantBundle {
    pub source: LabeledTree,
    pub mutant: LabeledTree,
    pub log: MutationLog,
}

impl MutantBundle {
    pub fn write(&self, dir: &Path) -> Result<(), BundleError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| BundleError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let log = serde_json::to_string_pretty(&self.log).expect("logs always serialize");
        for (name, body) in [
            (SOURCE_FILE, serialize_tree_json(&self.source)),
            (MUTANT_FILE, serialize_tree_json(&self.mutant)),
            (LOG_FILE, log),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, BundleError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path)
                .map(|s| (path.clone(), s))
                .map_err(|source| BundleError::Io { path, source })
        };
        let tree = |name: &str| {
            let (path, s) = read(name)?;
            parse_tree_json(&s).map_err(|source| BundleError::Tree { path, source })
        };
        let source = tree(SOURCE_FILE)?;
        let mutant = tree(MUTANT_FILE)?;
        let (path, s) = read(LOG_FILE)?;
        let log = serde_json::from_str(&s).map_err(|source| BundleError::Log { path, source })?;
        Ok(MutantBundle { source, mutant, log })
    }
}
