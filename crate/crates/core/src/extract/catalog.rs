//! Folding alias clusters into the component catalog.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::flow::{DecisionJournal, DecisionKind, DecisionPolicy, DecisionRequest, Evidence};
use crate::text::RequirementsDocument;

use super::alias::{choose_canonical, UnionFind};
use super::{
    AliasCluster, Attribute, ClusterStatus, Component, ComponentCatalog, EntityCandidate, ExtractError, KindHint, LinkStatus, Mention,
};

/// Trailing nouns that name a measurement of a quantity rather than the
/// quantity: "energy level" is keyed as `energy`.
const MEASURE_NOUNS: &[&str] = &["level", "value", "status", "amount", "degree", "state"];

/// Candidates that did not make it into the catalog, kept for review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub phrase: String,
    pub reason: String,
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogBuild {
    pub catalog: ComponentCatalog,
    pub requests: Vec<DecisionRequest>,
    pub dropped: Vec<DroppedCandidate>,
}

/// Signature key of an attribute display name.
pub fn attribute_key(name: &str) -> String {
    let words: Vec<&str> = name.split(' ').collect();
    if words.len() > 1 && MEASURE_NOUNS.contains(words.last().unwrap()) {
        words[..words.len() - 1].join(" ")
    } else {
        name.to_string()
    }
}

/// Component name: the leading word all members share ("parking place",
/// "parking station" → "Parking"), else the canonical phrase title-cased
/// ("e-car" → "E-Car").
pub fn component_name(cluster: &AliasCluster) -> String {
    let firsts: BTreeSet<&str> = cluster.members.iter().map(|m| m.split(' ').next().unwrap_or("")).collect();
    let shared = cluster.members.len() > 1 && firsts.len() == 1 && cluster.members.iter().all(|m| m.contains(' '));
    let base = if shared { firsts.into_iter().next().unwrap().to_string() } else { cluster.canonical.clone() };
    base.split(' ').map(title_case).collect::<Vec<_>>().join(" ")
}

fn title_case(word: &str) -> String {
    word.split('-')
        .map(|part| {
            let mut cs = part.chars();
            match cs.next() {
                Some(c) => c.to_uppercase().chain(cs).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join("-")
}

/// Builds the catalog under a decision policy.
///
/// Clusters with a component-hinted member become components; attribute
/// clusters attach to the owner named by their possessive mentions
/// (majority vote, ties go to the designer); clusters with neither are
/// dropped and reported. Undecided string merges are an error under
/// [`DecisionPolicy::Require`], accepted under `AssumeDefaults` and left
/// unmerged (with a request) under `Defer`.
pub fn build_catalog(
    doc: &RequirementsDocument,
    cands: &[EntityCandidate],
    clusters: &[AliasCluster],
    journal: &DecisionJournal,
    policy: DecisionPolicy,
) -> Result<CatalogBuild, ExtractError> {
    let by_phrase: BTreeMap<&str, &EntityCandidate> = cands.iter().map(|c| (c.phrase.as_str(), c)).collect();
    let counts: BTreeMap<&str, usize> = cands.iter().map(|c| (c.phrase.as_str(), c.mentions.len())).collect();
    let order: BTreeMap<&str, usize> = doc.sentences.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let position = |m: &Mention| (order.get(m.sentence_id.as_str()).copied().unwrap_or(usize::MAX), m.span.0);
    let mut requests = Vec::new();

    // Re-partition every cluster according to the journal.
    let mut finals: Vec<AliasCluster> = Vec::new();
    for cluster in clusters {
        let members: Vec<&str> = cluster.members.iter().map(String::as_str).collect();
        let idx = |p: &str| members.iter().position(|m| *m == p).expect("links stay inside their cluster");
        let mut uf = UnionFind::new(members.len());
        let mut links = Vec::new();
        for link in &cluster.evidence {
            let mut link = link.clone();
            if link.status != LinkStatus::Auto {
                let target = link.target();
                match journal.choice(DecisionKind::AliasMerge, &target) {
                    Some("accept") => link.status = LinkStatus::Confirmed,
                    Some("reject") => link.status = LinkStatus::Rejected,
                    other => {
                        if let Some(choice) = other {
                            log::warn!("ignoring alias_merge choice `{choice}` for {target}");
                        }
                        link.status = LinkStatus::Pending;
                        match policy {
                            DecisionPolicy::Require => return Err(ExtractError::UnresolvedDecision(target)),
                            DecisionPolicy::AssumeDefaults => {}
                            DecisionPolicy::Defer => {
                                requests.push(alias_request(doc, &by_phrase, &link));
                                links.push(link);
                                continue;
                            }
                        }
                    }
                }
            }
            if link.status != LinkStatus::Rejected {
                uf.union(idx(&link.a), idx(&link.b));
            }
            links.push(link);
        }
        for group in uf.groups() {
            let group: BTreeSet<String> = group.iter().map(|&i| members[i].to_string()).collect();
            let evidence: Vec<_> = links.iter().filter(|l| group.contains(&l.a) && group.contains(&l.b)).cloned().collect();
            let merged_pending = evidence.iter().any(|l| l.status == LinkStatus::Pending);
            let status = if merged_pending {
                ClusterStatus::PendingReview
            } else if evidence.iter().any(|l| l.status == LinkStatus::Confirmed) {
                ClusterStatus::Confirmed
            } else {
                ClusterStatus::Auto
            };
            finals.push(AliasCluster {
                canonical: choose_canonical(group.iter().map(String::as_str), &counts),
                members: group,
                evidence,
                status,
            });
        }
    }

    let mentions_of = |cl: &AliasCluster| -> Vec<Mention> {
        let mut ms: Vec<Mention> =
            cl.members.iter().filter_map(|p| by_phrase.get(p.as_str())).flat_map(|c| c.mentions.iter().cloned()).collect();
        ms.sort_by_key(|m| position(m));
        ms
    };
    let kind_of = |cl: &AliasCluster| {
        let hints: BTreeSet<KindHint> = cl.members.iter().filter_map(|p| by_phrase.get(p.as_str())).map(|c| c.kind_hint).collect();
        if hints.contains(&KindHint::Component) {
            KindHint::Component
        } else if hints.contains(&KindHint::Attribute) {
            KindHint::Attribute
        } else {
            KindHint::Unknown
        }
    };

    let mut dropped = Vec::new();
    let mut comp_clusters = Vec::new();
    let mut attr_clusters = Vec::new();
    for cl in finals {
        match kind_of(&cl) {
            KindHint::Component => comp_clusters.push(cl),
            KindHint::Attribute => attr_clusters.push(cl),
            KindHint::Unknown => {
                for p in &cl.members {
                    dropped.push(DroppedCandidate {
                        phrase: p.clone(),
                        reason: "unknown kind".into(),
                        mentions: by_phrase[p.as_str()].mentions.clone(),
                    });
                }
            }
        }
    }

    comp_clusters.sort_by_key(|cl| mentions_of(cl).first().map(&position));
    let mut components: Vec<Component> = Vec::new();
    for cl in comp_clusters {
        let mut name = component_name(&cl);
        let base = name.clone();
        let mut n = 2;
        while components.iter().any(|c| c.name == name) {
            name = format!("{base} {n}");
            n += 1;
        }
        let mentions = mentions_of(&cl);
        components.push(Component { name, cluster: cl, attributes: Vec::new(), mentions });
    }
    let owner_of_phrase: BTreeMap<&str, usize> =
        components.iter().enumerate().flat_map(|(i, c)| c.cluster.members.iter().map(move |m| (m.as_str(), i))).collect();
    let owner_of_phrase: BTreeMap<String, usize> = owner_of_phrase.into_iter().map(|(k, v)| (k.to_string(), v)).collect();

    attr_clusters.sort_by_key(|cl| mentions_of(cl).first().map(&position));
    let mut attached: Vec<(usize, Attribute)> = Vec::new();
    for cl in attr_clusters {
        let mentions = mentions_of(&cl);
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for m in &mentions {
            if let Some(i) = m.owner.as_deref().and_then(|o| owner_of_phrase.get(o)) {
                *votes.entry(*i).or_default() += 1;
            }
        }
        let top = votes.values().copied().max().unwrap_or(0);
        let leaders: Vec<usize> = votes.iter().filter(|(_, v)| **v == top && top > 0).map(|(k, _)| *k).collect();

        let target = cl.canonical.clone();
        let owner = if let Some(choice) = journal.choice(DecisionKind::Owner, &target) {
            match components.iter().position(|c| c.name == choice) {
                Some(i) => Some(i),
                None => {
                    return Err(ExtractError::UnknownOwner { attribute: target, component: choice.to_string() });
                }
            }
        } else if leaders.len() == 1 {
            Some(leaders[0])
        } else {
            let pool: Vec<usize> = if leaders.is_empty() { (0..components.len()).collect() } else { leaders };
            let suggestion = suggest_owner(&components, &pool, &mentions);
            match (policy, suggestion) {
                (_, None) => None,
                (DecisionPolicy::Require, _) => return Err(ExtractError::UnresolvedOwner(target)),
                (DecisionPolicy::AssumeDefaults, s) => s,
                (DecisionPolicy::Defer, Some(s)) => {
                    let mut req = DecisionRequest::new(DecisionKind::Owner, &target, components[s].name.clone())
                        .options(pool.iter().map(|&i| components[i].name.clone()));
                    for (&i, &v) in &votes {
                        req.evidence.push(Evidence::new("possessive").score(v as f64).note(components[i].name.clone()));
                    }
                    // Left out of the catalog until answered; later stages
                    // can still run.
                    req.blocking = false;
                    fill_context(doc, &mut req, &mentions);
                    requests.push(req);
                    None
                }
            }
        };
        match owner {
            Some(i) => {
                let label = by_phrase.get(cl.canonical.as_str()).map(|c| c.label.clone()).unwrap_or_else(|| cl.canonical.clone());
                attached.push((i, Attribute { key: attribute_key(&label), name: label, cluster: cl, mentions }));
            }
            None => {
                for p in &cl.members {
                    dropped.push(DroppedCandidate {
                        phrase: p.clone(),
                        reason: "owner undecided".into(),
                        mentions: by_phrase[p.as_str()].mentions.clone(),
                    });
                }
            }
        }
    }
    for (i, mut attr) in attached {
        let comp = &mut components[i];
        if comp.attributes.iter().any(|a| a.key == attr.key) {
            attr.key = attr.name.clone();
        }
        comp.attributes.push(attr);
    }

    dropped.sort_by(|a, b| a.phrase.cmp(&b.phrase));
    requests.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(CatalogBuild { catalog: ComponentCatalog { components }, requests, dropped })
}

/// Among `pool`, the component mentioned in most of the attribute's
/// sentences; ties go to catalog order.
fn suggest_owner(components: &[Component], pool: &[usize], mentions: &[Mention]) -> Option<usize> {
    let sentences: BTreeSet<&str> = mentions.iter().map(|m| m.sentence_id.as_str()).collect();
    pool.iter().copied().max_by_key(|&i| {
        let shared = components[i].mentions.iter().filter(|m| sentences.contains(m.sentence_id.as_str())).count();
        (shared, std::cmp::Reverse(i))
    })
}

fn alias_request(doc: &RequirementsDocument, by_phrase: &BTreeMap<&str, &EntityCandidate>, link: &super::AliasLink) -> DecisionRequest {
    let mut req = DecisionRequest::new(DecisionKind::AliasMerge, link.target(), "accept").options(["accept", "reject"]);
    // An open link keeps its phrases apart, which is safe to build on.
    req.blocking = false;
    let mut ev = Evidence::new(match link.kind {
        super::LinkKind::Apposition => "apposition",
        super::LinkKind::StringDistance => "string_distance",
        super::LinkKind::Containment => "containment",
        super::LinkKind::Nominalization => "nominalization",
    });
    if let Some(s) = link.score {
        ev = ev.score(s);
    }
    req.evidence.push(ev);
    let mentions: Vec<Mention> =
        [&link.a, &link.b].iter().filter_map(|p| by_phrase.get(p.as_str())).flat_map(|c| c.mentions.first().cloned()).collect();
    fill_context(doc, &mut req, &mentions);
    req
}

/// Attaches the sentences of the given mentions as excerpt and highlights.
pub(crate) fn fill_context(doc: &RequirementsDocument, req: &mut DecisionRequest, mentions: &[Mention]) {
    let mut seen = BTreeSet::new();
    let mut texts = Vec::new();
    for m in mentions {
        if seen.insert(m.sentence_id.clone()) {
            if let Some(s) = doc.sentence(&m.sentence_id) {
                texts.push(s.text.clone());
                req.evidence.push(Evidence::new("mention").sentence(&m.sentence_id));
            }
        }
        req.spans.push(m.span);
    }
    req.excerpt = texts.join(" … ");
}
