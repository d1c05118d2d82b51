//! Lexical machinery: a synset graph with path and Wu-Palmer similarity for
//! verb classification, and string metrics for alias clustering.

mod strsim;
mod synset;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use strsim::{jaro, jaro_winkler, levenshtein};
pub use synset::{Synset, SynsetGraph, SynsetPos, BUNDLED_SYNSETS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("unknown synset `{0}`")]
    UnknownSynset(String),
    #[error("synsets `{a}` and `{b}` have different parts of speech")]
    PosMismatch { a: String, b: String },
    #[error("synset file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("synset `{synset}` names unknown hypernym `{hypernym}`")]
    DanglingHypernym { synset: String, hypernym: String },
    #[error("two {pos} roots: `{first}` and `{second}`")]
    MultipleRoots { pos: SynsetPos, first: String, second: String },
    #[error("synset `{0}` does not reach a root")]
    Unrooted(String),
    #[error("hypernym cycle through `{0}`")]
    Cycle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Path,
    #[default]
    Wup,
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "path" => Ok(Measure::Path),
            "wup" => Ok(Measure::Wup),
            other => Err(format!("unknown similarity measure `{other}` (expected path or wup)")),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Path => "path",
            Measure::Wup => "wup",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub measure: Measure,
}

impl SimilarityScore {
    fn new(value: f64, measure: Measure) -> Self {
        debug_assert!((0.0..=1.0).contains(&value));
        SimilarityScore { value, measure }
    }
}

/// `1 / (1 + d)` where `d` is the shortest path between the two synsets
/// through a common hypernym.
pub fn path_similarity(a: &str, b: &str, g: &SynsetGraph) -> Result<SimilarityScore, LexiconError> {
    g.require_pair(a, b)?;
    let up_a = g.ancestors(a);
    let up_b = g.ancestors(b);
    let dist =
        up_a.iter().filter_map(|(node, da)| up_b.get(node).map(|db| da + db)).min().expect("synsets of one part of speech share a root");
    Ok(SimilarityScore::new(1.0 / (1.0 + dist as f64), Measure::Path))
}

/// Wu-Palmer similarity, `2·depth(lcs) / (depth(a) + depth(b))`, where the
/// depths of `a` and `b` are measured through the deepest common subsumer.
pub fn wup_similarity(a: &str, b: &str, g: &SynsetGraph) -> Result<SimilarityScore, LexiconError> {
    g.require_pair(a, b)?;
    let up_a = g.ancestors(a);
    let up_b = g.ancestors(b);
    let (lcs_depth, da, db) = up_a
        .iter()
        .filter_map(|(node, da)| up_b.get(node).map(|db| (g.depth(node).unwrap_or(1), *da, *db)))
        .max_by(|x, y| x.0.cmp(&y.0).then((y.1 + y.2).cmp(&(x.1 + x.2))))
        .expect("synsets of one part of speech share a root");
    let num = 2.0 * lcs_depth as f64;
    let den = (da + db) as f64 + num;
    Ok(SimilarityScore::new(num / den, Measure::Wup))
}

pub fn similarity(a: &str, b: &str, g: &SynsetGraph, measure: Measure) -> Result<SimilarityScore, LexiconError> {
    match measure {
        Measure::Path => path_similarity(a, b, g),
        Measure::Wup => wup_similarity(a, b, g),
    }
}

/// Best similarity between any verb sense of `lemma` and any verb sense of a
/// seed lemma. A lemma that literally belongs to the seed set scores 1.0;
/// a lemma without verb senses scores 0.0.
pub fn verb_affinity(lemma: &str, seeds: &BTreeSet<String>, g: &SynsetGraph, measure: Measure) -> SimilarityScore {
    let lemma = lemma.to_lowercase();
    if seeds.iter().any(|s| s.eq_ignore_ascii_case(&lemma)) {
        return SimilarityScore::new(1.0, measure);
    }
    let mut best = 0.0f64;
    for own in g.lookup(&lemma, SynsetPos::Verb) {
        for seed in seeds {
            for other in g.lookup(seed, SynsetPos::Verb) {
                if let Ok(score) = similarity(own, other, g, measure) {
                    best = best.max(score.value);
                }
            }
        }
    }
    SimilarityScore::new(best, measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, VecDeque};

    const FIXTURE: &str = "\
root|v|act|
transfer|v|transfer|root
exchange_v|v|exchange|transfer
propagate_v|v|propagate|transfer
observe|v|observe|root
monitor_v|v|monitor|observe
";

    fn fixture() -> SynsetGraph {
        SynsetGraph::parse(FIXTURE).unwrap()
    }

    /// Undirected BFS over hypernym edges; on a tree this equals the path
    /// through the lowest common subsumer.
    fn bfs_distance(g: &SynsetGraph, a: &str, b: &str) -> usize {
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for s in g.synsets() {
            for h in &s.hypernyms {
                adj.entry(s.id.as_str()).or_default().push(h.as_str());
                adj.entry(h.as_str()).or_default().push(s.id.as_str());
            }
        }
        let mut seen = HashMap::from([(a, 0usize)]);
        let mut queue = VecDeque::from([a]);
        while let Some(n) = queue.pop_front() {
            if n == b {
                return seen[n];
            }
            for &m in adj.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                if !seen.contains_key(m) {
                    seen.insert(m, seen[n] + 1);
                    queue.push_back(m);
                }
            }
        }
        unreachable!()
    }

    #[test]
    fn path_similarity_matches_bfs_oracle() {
        let g = fixture();
        assert_eq!(bfs_distance(&g, "exchange_v", "propagate_v"), 2);
        assert_eq!(bfs_distance(&g, "exchange_v", "monitor_v"), 4);
        let s = path_similarity("exchange_v", "propagate_v", &g).unwrap();
        assert!((s.value - 1.0 / 3.0).abs() < 1e-12);
        let s = path_similarity("exchange_v", "monitor_v", &g).unwrap();
        assert!((s.value - 0.2).abs() < 1e-12);
        assert_eq!(path_similarity("monitor_v", "monitor_v", &g).unwrap().value, 1.0);
    }

    #[test]
    fn wup_examples() {
        let g = fixture();
        assert_eq!(g.depth("root"), Some(1));
        assert_eq!(g.depth("exchange_v"), Some(3));
        assert_eq!(wup_similarity("exchange_v", "exchange_v", &g).unwrap().value, 1.0);
        let s = wup_similarity("exchange_v", "propagate_v", &g).unwrap();
        assert!((s.value - 4.0 / 6.0).abs() < 1e-12);
        let s = wup_similarity("exchange_v", "monitor_v", &g).unwrap();
        assert!((s.value - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let g = SynsetGraph::parse(&format!("{FIXTURE}thing|n|thing|\n")).unwrap();
        assert_eq!(path_similarity("exchange_v", "nope", &g), Err(LexiconError::UnknownSynset("nope".into())));
        assert!(matches!(wup_similarity("exchange_v", "thing", &g), Err(LexiconError::PosMismatch { .. })));
        assert!(matches!(SynsetGraph::parse("a|v|a|b\nb|v|b|a\nr|v|r|\n"), Err(LexiconError::Unrooted(_)) | Err(LexiconError::Cycle(_))));
        assert!(matches!(SynsetGraph::parse("a|v|a|zz\n"), Err(LexiconError::DanglingHypernym { .. })));
        assert!(matches!(SynsetGraph::parse("a|v|a\n"), Err(LexiconError::Malformed { line: 1, .. })));
    }

    #[test]
    fn affinity_examples() {
        let g = fixture();
        let seeds = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(verb_affinity("exchange", &seeds(&["exchange", "propagate"]), &g, Measure::Wup).value, 1.0);
        let s = verb_affinity("propagate", &seeds(&["exchange"]), &g, Measure::Wup);
        assert!((s.value - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(verb_affinity("zzz-unknown", &seeds(&["monitor"]), &g, Measure::Wup).value, 0.0);
    }

    #[test]
    fn bundled_lexicon_loads() {
        let g = SynsetGraph::bundled();
        assert!(g.len() >= 150);
        assert!(g.root(SynsetPos::Verb).is_some());
        assert!(g.root(SynsetPos::Noun).is_some());
    }
}
