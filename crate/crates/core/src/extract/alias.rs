//! Alias clustering: appositions merge outright, string-similar phrases
//! merge pending a designer's confirmation.

use std::collections::{BTreeMap, BTreeSet};

use crate::lexicon::jaro_winkler;

use super::candidates::match_key;
use super::{AliasCluster, AliasConfig, AliasLink, ClusterStatus, EntityCandidate, KindHint, LinkKind, LinkStatus};

/// Disjoint-set forest over phrase indices.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Links the two sets; the smaller index becomes the representative so
    /// results never depend on union order.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }

    /// Groups of indices, each sorted, ordered by their smallest member.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.parent.len() {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        by_root.into_values().collect()
    }
}

/// Canonical member: most mentions, then longest, then lexicographically first.
pub fn choose_canonical<'a>(members: impl IntoIterator<Item = &'a str>, mentions: &BTreeMap<&str, usize>) -> String {
    members
        .into_iter()
        .max_by(|a, b| {
            let ca = mentions.get(a).copied().unwrap_or(0);
            let cb = mentions.get(b).copied().unwrap_or(0);
            ca.cmp(&cb).then(a.chars().count().cmp(&b.chars().count())).then(b.cmp(a))
        })
        .unwrap_or_default()
        .to_string()
}

fn contains_words(long: &str, short: &str) -> bool {
    let lw: Vec<&str> = long.split(' ').collect();
    let sw: Vec<&str> = short.split(' ').collect();
    sw.len() < lw.len() && lw.windows(sw.len()).any(|w| w == sw.as_slice())
}

/// `available` → `availability`, `accessible` → `accessibility`.
fn nominalize(adjective: &str) -> Option<String> {
    adjective.strip_suffix("able").map(|s| format!("{s}ability")).or_else(|| adjective.strip_suffix("ible").map(|s| format!("{s}ibility")))
}

/// Why two phrases might name the same thing, short of an apposition.
pub fn string_evidence(a: &str, b: &str, threshold: f64) -> Option<(LinkKind, f64)> {
    let score = jaro_winkler(&match_key(a), &match_key(b));
    if score >= threshold {
        return Some((LinkKind::StringDistance, score));
    }
    if contains_words(a, b) || contains_words(b, a) {
        return Some((LinkKind::Containment, score));
    }
    let nominal = |x: &str, y: &str| {
        let first = x.split(' ').next().unwrap_or("");
        x.contains(' ') && nominalize(first).is_some_and(|n| n == y)
    };
    if nominal(a, b) || nominal(b, a) {
        return Some((LinkKind::Nominalization, score));
    }
    None
}

pub fn link_target(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}|{b}")
    } else {
        format!("{b}|{a}")
    }
}

/// Union-find over candidates. Apposition pairs merge with status `auto`;
/// string-similar pairs (Jaro-Winkler at or above the threshold, whole-word
/// containment, or an adjective/nominalization pair) merge as
/// `pending_review`. String links are only proposed where they can matter:
/// when they touch, directly or through other links, a candidate hinted as
/// component or attribute.
pub fn cluster_aliases(cands: &[EntityCandidate], pairs: &[(String, String, String)], config: &AliasConfig) -> Vec<AliasCluster> {
    let phrases: Vec<&str> = cands.iter().map(|c| c.phrase.as_str()).collect();
    let index: BTreeMap<&str, usize> = phrases.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let mentions: BTreeMap<&str, usize> = cands.iter().map(|c| (c.phrase.as_str(), c.mentions.len())).collect();

    let mut links: Vec<(usize, usize, AliasLink)> = Vec::new();
    let mut appos_pairs = BTreeSet::new();
    for (a, b, sentence) in pairs {
        let (Some(&ia), Some(&ib)) = (index.get(a.as_str()), index.get(b.as_str())) else { continue };
        if ia == ib || !appos_pairs.insert(link_target(a, b)) {
            continue;
        }
        links.push((
            ia,
            ib,
            AliasLink {
                a: a.clone().min(b.clone()),
                b: a.clone().max(b.clone()),
                kind: LinkKind::Apposition,
                score: None,
                sentence: Some(sentence.clone()),
                status: LinkStatus::Auto,
            },
        ));
    }

    let mut uf = UnionFind::new(phrases.len());
    for (a, b, _) in &links {
        uf.union(*a, *b);
    }

    let mut pending: Vec<(usize, usize, AliasLink)> = Vec::new();
    for i in 0..phrases.len() {
        for j in i + 1..phrases.len() {
            let (a, b) = (phrases[i], phrases[j]);
            if appos_pairs.contains(&link_target(a, b)) {
                continue;
            }
            if let Some((kind, score)) = string_evidence(a, b, config.threshold) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                pending.push((
                    i,
                    j,
                    AliasLink {
                        a: lo.to_string(),
                        b: hi.to_string(),
                        kind,
                        score: Some(round4(score)),
                        sentence: None,
                        status: LinkStatus::Pending,
                    },
                ));
            }
        }
    }

    // Grow the relevant region to a fixpoint.
    let hinted: Vec<bool> = cands.iter().map(|c| c.kind_hint != KindHint::Unknown).collect();
    let relevant_roots =
        |uf: &mut UnionFind| -> BTreeSet<usize> { (0..phrases.len()).filter(|&i| hinted[i]).map(|i| uf.find(i)).collect() };
    let mut kept = vec![false; pending.len()];
    loop {
        let roots = relevant_roots(&mut uf);
        let mut changed = false;
        for (k, (a, b, _)) in pending.iter().enumerate() {
            if kept[k] {
                continue;
            }
            if roots.contains(&uf.find(*a)) || roots.contains(&uf.find(*b)) {
                kept[k] = true;
                uf.union(*a, *b);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    links.extend(pending.into_iter().zip(kept).filter(|(_, k)| *k).map(|(l, _)| l));

    let mut clusters = Vec::new();
    for group in uf.groups() {
        let members: BTreeSet<String> = group.iter().map(|&i| phrases[i].to_string()).collect();
        let evidence: Vec<AliasLink> = links.iter().filter(|(a, _, _)| group.contains(a)).map(|(_, _, l)| l.clone()).collect();
        let status =
            if evidence.iter().any(|l| l.status == LinkStatus::Pending) { ClusterStatus::PendingReview } else { ClusterStatus::Auto };
        clusters.push(AliasCluster {
            canonical: choose_canonical(members.iter().map(String::as_str), &mentions),
            members,
            evidence,
            status,
        });
    }
    clusters
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_find_is_order_independent() {
        let mut a = UnionFind::new(5);
        a.union(3, 1);
        a.union(4, 3);
        let mut b = UnionFind::new(5);
        b.union(4, 3);
        b.union(1, 4);
        assert_eq!(a.groups(), b.groups());
        assert_eq!(a.groups(), vec![vec![0], vec![1, 3, 4], vec![2]]);
    }

    #[test]
    fn canonical_tie_breaks() {
        let counts = BTreeMap::from([("car", 1), ("e-car", 6)]);
        assert_eq!(choose_canonical(["car", "e-car"], &counts), "e-car");
        let even = BTreeMap::from([("plan", 2), ("trip plan", 2)]);
        assert_eq!(choose_canonical(["plan", "trip plan"], &even), "trip plan");
        let same = BTreeMap::from([("abc", 1), ("abd", 1)]);
        assert_eq!(choose_canonical(["abd", "abc"], &same), "abc");
    }

    #[test]
    fn evidence_kinds() {
        assert_eq!(string_evidence("car", "e-car", 0.84).map(|e| e.0), Some(LinkKind::StringDistance));
        assert_eq!(string_evidence("plan", "trip plan", 0.84).map(|e| e.0), Some(LinkKind::Containment));
        assert_eq!(string_evidence("available parking slot", "availability", 0.84).map(|e| e.0), Some(LinkKind::Nominalization));
        assert_eq!(string_evidence("plan", "parking", 0.84), None);
        assert_eq!(string_evidence("position", "poi", 0.84), None);
        // "car" is not a word of "e-car".
        assert!(!contains_words("e-car", "car"));
    }
}
