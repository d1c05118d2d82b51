//! Synset graph loaded from the bundled one-synset-per-line data file.
//!
//! Line format: `id|pos|lemma,lemma|hypernym_id,...`. Blank lines and lines
//! starting with `#` are ignored. A synset without hypernyms is the root of
//! its part of speech; exactly one root per part of speech is allowed.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LexiconError;

pub const BUNDLED_SYNSETS: &str = include_str!("../../data/synsets.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynsetPos {
    Verb,
    Noun,
}

impl FromStr for SynsetPos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "v" | "verb" => Ok(SynsetPos::Verb),
            "n" | "noun" => Ok(SynsetPos::Noun),
            other => Err(format!("unknown part of speech `{other}`")),
        }
    }
}

impl fmt::Display for SynsetPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynsetPos::Verb => f.write_str("verb"),
            SynsetPos::Noun => f.write_str("noun"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub id: String,
    pub pos: SynsetPos,
    pub lemmas: BTreeSet<String>,
    pub hypernyms: BTreeSet<String>,
}

/// Read-only hypernym graph. Depths are precomputed at load time.
#[derive(Debug, Clone)]
pub struct SynsetGraph {
    synsets: BTreeMap<String, Synset>,
    roots: BTreeMap<SynsetPos, String>,
    depth: HashMap<String, usize>,
    by_lemma: HashMap<(String, SynsetPos), Vec<String>>,
}

impl SynsetGraph {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SYNSETS).expect("bundled synset file is well-formed")
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut synsets = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() != 4 {
                return Err(LexiconError::Malformed {
                    line: line_no,
                    reason: format!("expected 4 `|`-separated fields, found {}", fields.len()),
                });
            }
            let id = fields[0].trim().to_string();
            if id.is_empty() {
                return Err(LexiconError::Malformed { line: line_no, reason: "empty synset id".into() });
            }
            let pos = fields[1].parse::<SynsetPos>().map_err(|reason| LexiconError::Malformed { line: line_no, reason })?;
            let lemmas: BTreeSet<String> = split_list(fields[2]).map(|l| l.to_lowercase()).collect();
            if lemmas.is_empty() {
                return Err(LexiconError::Malformed { line: line_no, reason: "synset without lemmas".into() });
            }
            let hypernyms = split_list(fields[3]).map(str::to_string).collect();
            if synsets.contains_key(&id) {
                return Err(LexiconError::Malformed { line: line_no, reason: format!("duplicate synset `{id}`") });
            }
            synsets.insert(id.clone(), Synset { id, pos, lemmas, hypernyms });
        }
        Self::from_synsets(synsets)
    }

    pub fn from_synsets(synsets: BTreeMap<String, Synset>) -> Result<Self, LexiconError> {
        let mut roots = BTreeMap::new();
        for s in synsets.values() {
            for h in &s.hypernyms {
                let target = synsets.get(h).ok_or_else(|| LexiconError::DanglingHypernym { synset: s.id.clone(), hypernym: h.clone() })?;
                if target.pos != s.pos {
                    return Err(LexiconError::PosMismatch { a: s.id.clone(), b: h.clone() });
                }
            }
            if s.hypernyms.is_empty() {
                if let Some(prev) = roots.insert(s.pos, s.id.clone()) {
                    return Err(LexiconError::MultipleRoots { pos: s.pos, first: prev, second: s.id.clone() });
                }
            }
        }

        // Depth = 1 + shortest hypernym distance to the root; BFS downwards
        // from each root over the inverted hypernym relation.
        let mut hyponyms: HashMap<&str, Vec<&str>> = HashMap::new();
        for s in synsets.values() {
            for h in &s.hypernyms {
                hyponyms.entry(h.as_str()).or_default().push(s.id.as_str());
            }
        }
        let mut depth: HashMap<String, usize> = HashMap::new();
        for root in roots.values() {
            let mut queue = VecDeque::from([(root.as_str(), 1usize)]);
            depth.insert(root.clone(), 1);
            while let Some((node, d)) = queue.pop_front() {
                for &child in hyponyms.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                    if !depth.contains_key(child) {
                        depth.insert(child.to_string(), d + 1);
                        queue.push_back((child, d + 1));
                    }
                }
            }
        }
        if let Some(orphan) = synsets.keys().find(|id| !depth.contains_key(*id)) {
            return Err(LexiconError::Unrooted(orphan.clone()));
        }
        check_acyclic(&synsets)?;

        let mut by_lemma: HashMap<(String, SynsetPos), Vec<String>> = HashMap::new();
        for s in synsets.values() {
            for l in &s.lemmas {
                by_lemma.entry((l.clone(), s.pos)).or_default().push(s.id.clone());
            }
        }
        Ok(SynsetGraph { synsets, roots, depth, by_lemma })
    }

    pub fn get(&self, id: &str) -> Option<&Synset> {
        self.synsets.get(id)
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn root(&self, pos: SynsetPos) -> Option<&str> {
        self.roots.get(&pos).map(String::as_str)
    }

    pub fn depth(&self, id: &str) -> Option<usize> {
        self.depth.get(id).copied()
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.values()
    }

    /// Synset ids containing `lemma` (case-folded), in id order.
    pub fn lookup(&self, lemma: &str, pos: SynsetPos) -> &[String] {
        self.by_lemma.get(&(lemma.to_lowercase(), pos)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every ancestor of `id` (including itself) with its shortest upward distance.
    pub fn ancestors(&self, id: &str) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        let Some((start, _)) = self.synsets.get_key_value(id) else {
            return out;
        };
        let mut queue = VecDeque::from([(start.as_str(), 0usize)]);
        out.insert(start.as_str(), 0);
        while let Some((node, d)) = queue.pop_front() {
            for h in &self.synsets[node].hypernyms {
                if !out.contains_key(h.as_str()) {
                    out.insert(h.as_str(), d + 1);
                    queue.push_back((h.as_str(), d + 1));
                }
            }
        }
        out
    }

    pub(crate) fn require_pair(&self, a: &str, b: &str) -> Result<(), LexiconError> {
        let sa = self.get(a).ok_or_else(|| LexiconError::UnknownSynset(a.to_string()))?;
        let sb = self.get(b).ok_or_else(|| LexiconError::UnknownSynset(b.to_string()))?;
        if sa.pos != sb.pos {
            return Err(LexiconError::PosMismatch { a: a.to_string(), b: b.to_string() });
        }
        Ok(())
    }
}

fn split_list(field: &str) -> impl Iterator<Item = &str> {
    field.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn check_acyclic(synsets: &BTreeMap<String, Synset>) -> Result<(), LexiconError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = HashMap::new();
    for start in synsets.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        let mut stack: Vec<(&str, Vec<&str>)> = vec![(start, synsets[start].hypernyms.iter().map(String::as_str).collect())];
        marks.insert(start, Mark::Open);
        while let Some((node, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(next) => match marks.get(next) {
                    Some(Mark::Open) => return Err(LexiconError::Cycle(next.to_string())),
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next, Mark::Open);
                        let hs = synsets[next].hypernyms.iter().map(String::as_str).collect();
                        stack.push((next, hs));
                    }
                },
                None => {
                    marks.insert(node, Mark::Done);
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}
