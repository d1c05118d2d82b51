//! Component and attribute mining.
//!
//! Subjects and objects of requirement sentences are collected as noun-phrase
//! candidates, hinted as component/attribute by a few grammatical rules,
//! clustered into aliases, and finally folded into a [`ComponentCatalog`]
//! once the designer has confirmed the uncertain merges.

mod alias;
mod candidates;
mod catalog;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alias::{choose_canonical, cluster_aliases, link_target, string_evidence, UnionFind};
pub use candidates::{
    detect_appositions, exemplified_tokens, extract_candidates, hint_kinds, match_key, normalize_phrase, phrase_at, phrase_tokens,
    singularize, CANDIDATE_ROLES, NON_RESTRICTIVE,
};
pub use catalog::{attribute_key, build_catalog, component_name, CatalogBuild, DroppedCandidate};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("alias merge `{0}` needs a designer decision")]
    UnresolvedDecision(String),
    #[error("owner of attribute `{0}` needs a designer decision")]
    UnresolvedOwner(String),
    #[error("journal names unknown component `{component}` as owner of `{attribute}`")]
    UnknownOwner { attribute: String, component: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindHint {
    Component,
    Attribute,
    Unknown,
}

impl fmt::Display for KindHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KindHint::Component => "component",
            KindHint::Attribute => "attribute",
            KindHint::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub sentence_id: String,
    /// First and last token of the phrase (inclusive).
    pub tokens: (usize, usize),
    pub head: usize,
    pub role: String,
    /// Byte span of the phrase in the source document.
    pub span: (usize, usize),
    pub hint: KindHint,
    /// Possessor phrase for attribute mentions ("its" → the subject).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCandidate {
    /// Normalized phrase: lower-case, no determiners, singular head.
    pub phrase: String,
    /// Display form; acronyms keep their capitals.
    pub label: String,
    pub head_lemma: String,
    pub mentions: Vec<Mention>,
    pub kind_hint: KindHint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Apposition,
    StringDistance,
    Containment,
    Nominalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatus {
    Auto,
    Pending,
    Confirmed,
    Rejected,
}

/// One piece of evidence that two phrases co-refer. `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasLink {
    pub a: String,
    pub b: String,
    pub kind: LinkKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
    pub status: LinkStatus,
}

impl AliasLink {
    /// Journal target for the merge decision.
    pub fn target(&self) -> String {
        link_target(&self.a, &self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatus {
    Auto,
    PendingReview,
    Confirmed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasCluster {
    pub canonical: String,
    pub members: BTreeSet<String>,
    pub evidence: Vec<AliasLink>,
    pub status: ClusterStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AliasConfig {
    /// Minimum Jaro-Winkler similarity for a string-distance link.
    pub threshold: f64,
}

impl Default for AliasConfig {
    fn default() -> Self {
        AliasConfig { threshold: 0.84 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    /// Display name, e.g. "energy level".
    pub name: String,
    /// Name used in signatures, e.g. "energy".
    pub key: String,
    pub cluster: AliasCluster,
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub cluster: AliasCluster,
    pub attributes: Vec<Attribute>,
    pub mentions: Vec<Mention>,
}

/// What a phrase resolves to in the catalog.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CatalogEntity {
    Component(String),
    Attribute { component: String, key: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentCatalog {
    pub components: Vec<Component>,
}

impl ComponentCatalog {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    /// Looks an attribute up by signature key or display name.
    pub fn attribute(&self, component: &str, name: &str) -> Option<&Attribute> {
        self.component(component)?.attributes.iter().find(|a| a.key == name || a.name == name)
    }

    /// Resolves a normalized phrase through the alias clusters.
    pub fn resolve(&self, phrase: &str) -> Option<CatalogEntity> {
        for c in &self.components {
            if c.cluster.members.contains(phrase) {
                return Some(CatalogEntity::Component(c.name.clone()));
            }
            for a in &c.attributes {
                if a.cluster.members.contains(phrase) {
                    return Some(CatalogEntity::Attribute { component: c.name.clone(), key: a.key.clone() });
                }
            }
        }
        None
    }

    /// `(component name, attribute names)` pairs, in catalog order.
    pub fn summary(&self) -> Vec<(String, Vec<String>)> {
        self.components.iter().map(|c| (c.name.clone(), c.attributes.iter().map(|a| a.name.clone()).collect())).collect()
    }

    /// Checks the catalog invariants: unique component names, each attribute
    /// owned once, and every entry backed by a mention.
    pub fn check(&self) -> Result<(), String> {
        let mut names = BTreeSet::new();
        let mut phrases = BTreeSet::new();
        for c in &self.components {
            if !names.insert(c.name.as_str()) {
                return Err(format!("duplicate component `{}`", c.name));
            }
            if c.mentions.is_empty() {
                return Err(format!("component `{}` has no mention", c.name));
            }
            let mut keys = BTreeSet::new();
            for a in &c.attributes {
                if !keys.insert(a.key.as_str()) {
                    return Err(format!("duplicate attribute `{}::{}`", c.name, a.key));
                }
                if a.mentions.is_empty() {
                    return Err(format!("attribute `{}::{}` has no mention", c.name, a.key));
                }
                for m in &a.cluster.members {
                    if !phrases.insert(m.as_str()) {
                        return Err(format!("phrase `{m}` is owned twice"));
                    }
                }
            }
            for m in &c.cluster.members {
                if !phrases.insert(m.as_str()) {
                    return Err(format!("phrase `{m}` is owned twice"));
                }
            }
        }
        Ok(())
    }
}

/// `Component::attribute`, where the attribute may be the placeholder `?`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrRef {
    pub component: String,
    pub attribute: String,
}

impl AttrRef {
    pub const PLACEHOLDER: &'static str = "?";

    pub fn new(component: impl Into<String>, attribute: impl Into<String>) -> Self {
        AttrRef { component: component.into(), attribute: attribute.into() }
    }

    pub fn placeholder(component: impl Into<String>) -> Self {
        AttrRef::new(component, Self::PLACEHOLDER)
    }

    pub fn is_placeholder(&self) -> bool {
        self.attribute == Self::PLACEHOLDER
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}", self.component, self.attribute)
    }
}
