//! The IRM-SA decomposition graph: invariants joined by AND/OR
//! decompositions, with the exchange and situation structure the flow
//! analysis calls for.

mod assemble;
mod document;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassifiedRequirement, Condition, InvariantType, TimingConstraint};
use crate::extract::{AttrRef, ComponentCatalog};
use crate::flow::{Direction, FlowSignature, KnowledgeParameter};
use crate::text::SectionKind;

pub use assemble::{assemble, compose, proposal_target, requirement_text, system_output_target, Composition, Proposal, ProposalKind};
pub use document::{canonical_json, deserialize, serialize, SCHEMA_VERSION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("outputs of `{0}` span several components; the computing component is unclear")]
    NoOutputOwner(String),
    #[error("invariant `{0}` has no parent and is not a top-level requirement")]
    DanglingInvariant(String),
    #[error("proposal `{0}` is not accepted")]
    UnresolvedProposal(String),
    #[error("`{0}` has no finalized signature")]
    UnfinishedSignature(String),
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("`{choice}` is not a valid answer for `{target}`")]
    BadChoice { target: String, choice: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Extracted,
    Proposed,
    Manual,
}

/// Where an invariant comes from in the text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trace {
    pub item_id: String,
    pub sentence_id: String,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariant {
    pub id: u32,
    pub description: String,
    #[serde(rename = "type")]
    pub invariant_type: InvariantType,
    pub signature: FlowSignature,
    pub trace: Vec<Trace>,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub system_output: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingConstraint>,
}

impl Invariant {
    /// Requirement items this invariant traces to, without repeats.
    pub fn items(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.trace {
            if !out.contains(&t.item_id.as_str()) {
                out.push(&t.item_id);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DecompositionKind {
    #[serde(rename = "AND")]
    And,
    #[serde(rename = "OR")]
    Or,
}

impl fmt::Display for DecompositionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecompositionKind::And => "AND",
            DecompositionKind::Or => "OR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub parent: u32,
    pub children: Vec<u32>,
    pub kind: DecompositionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelAttribute {
    pub key: String,
    pub name: String,
}

/// The part of the catalog a model needs: names and attribute keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelComponent {
    pub name: String,
    pub attributes: Vec<ModelAttribute>,
}

impl ModelComponent {
    pub fn from_catalog(catalog: &ComponentCatalog) -> Vec<ModelComponent> {
        catalog
            .components
            .iter()
            .map(|c| ModelComponent {
                name: c.name.clone(),
                attributes: c.attributes.iter().map(|a| ModelAttribute { key: a.key.clone(), name: a.name.clone() }).collect(),
            })
            .collect()
    }
}

/// The journal a model was built from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalRef {
    pub entries: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrmModel {
    pub components: Vec<ModelComponent>,
    pub invariants: Vec<Invariant>,
    pub decompositions: Vec<Decomposition>,
    /// Requirement item → invariants tracing to it.
    pub traces: BTreeMap<String, Vec<u32>>,
    pub journal_ref: JournalRef,
}

impl IrmModel {
    pub fn empty() -> Self {
        IrmModel {
            components: Vec::new(),
            invariants: Vec::new(),
            decompositions: Vec::new(),
            traces: BTreeMap::new(),
            journal_ref: JournalRef::default(),
        }
    }

    pub fn invariant(&self, id: u32) -> Option<&Invariant> {
        self.invariants.iter().find(|i| i.id == id)
    }

    pub fn decomposition_of(&self, parent: u32) -> Option<&Decomposition> {
        self.decompositions.iter().find(|d| d.parent == parent)
    }

    pub fn parent_of(&self, id: u32) -> Option<u32> {
        self.decompositions.iter().find(|d| d.children.contains(&id)).map(|d| d.parent)
    }

    /// Invariants without a parent, in id order.
    pub fn roots(&self) -> Vec<u32> {
        let children: BTreeSet<u32> = self.decompositions.iter().flat_map(|d| d.children.iter().copied()).collect();
        self.invariants.iter().map(|i| i.id).filter(|id| !children.contains(id)).collect()
    }

    pub fn has_attribute(&self, attr: &AttrRef) -> bool {
        self.components
            .iter()
            .find(|c| c.name == attr.component)
            .is_some_and(|c| attr.is_placeholder() || c.attributes.iter().any(|a| a.key == attr.attribute))
    }

    /// The trace table: item → invariant ids, rebuilt from the invariants.
    pub fn trace_table(&self) -> BTreeMap<String, Vec<u32>> {
        let mut table: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for inv in &self.invariants {
            for item in inv.items() {
                table.entry(item.to_string()).or_default().push(inv.id);
            }
        }
        table
    }

    /// Checks the structural invariants: unique ids, well-formed
    /// decompositions, a forest, and signatures that resolve.
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |path: String, reason: &str| ModelError::SchemaViolation { path, reason: reason.to_string() };
        let mut ids = BTreeSet::new();
        for (k, inv) in self.invariants.iter().enumerate() {
            if inv.id == 0 || !ids.insert(inv.id) {
                return Err(bad(format!("invariants[{k}].id"), "ids must be positive and unique"));
            }
            if inv.description.trim().is_empty() {
                return Err(bad(format!("invariants[{k}].description"), "description is empty"));
            }
            if inv.origin == Origin::Extracted && inv.trace.is_empty() {
                return Err(bad(format!("invariants[{k}].trace"), "extracted invariant without trace"));
            }
            for (j, p) in inv.signature.params.iter().enumerate() {
                if !self.has_attribute(&p.attr()) {
                    return Err(bad(format!("invariants[{k}].signature.params[{j}]"), "name does not resolve"));
                }
            }
        }
        let mut parent: BTreeMap<u32, u32> = BTreeMap::new();
        let mut parents = BTreeSet::new();
        for (k, d) in self.decompositions.iter().enumerate() {
            let path = format!("decompositions[{k}]");
            if !ids.contains(&d.parent) {
                return Err(bad(format!("{path}.parent"), "unknown invariant"));
            }
            if !parents.insert(d.parent) {
                return Err(bad(format!("{path}.parent"), "invariant decomposed twice"));
            }
            if d.children.is_empty() {
                return Err(bad(format!("{path}.children"), "no children"));
            }
            if d.kind == DecompositionKind::Or && d.children.len() < 2 {
                return Err(bad(format!("{path}.children"), "OR needs at least two children"));
            }
            for c in &d.children {
                if *c == d.parent {
                    return Err(bad(format!("{path}.children"), "parent among its children"));
                }
                if !ids.contains(c) {
                    return Err(bad(format!("{path}.children"), "unknown invariant"));
                }
                if parent.insert(*c, d.parent).is_some() {
                    return Err(bad(format!("{path}.children"), "invariant with two parents"));
                }
            }
        }
        // Walking up from any node must end at a root.
        for &start in &ids {
            let mut seen = BTreeSet::from([start]);
            let mut cur = start;
            while let Some(&p) = parent.get(&cur) {
                if !seen.insert(p) {
                    return Err(bad("decompositions".into(), "decomposition cycle"));
                }
                cur = p;
            }
        }
        Ok(())
    }
}

/// True when the signature names two or more components, so the
/// computation cannot happen inside a single one.
pub fn needs_exchange(sig: &FlowSignature) -> bool {
    sig.components().len() >= 2
}

/// The component that computes a signature's outputs.
pub fn output_owner(sig: &FlowSignature) -> Result<Option<&str>, ModelError> {
    let owners: BTreeSet<&str> = sig.outputs().map(|p| p.component.as_str()).collect();
    match owners.len() {
        0 => Ok(None),
        1 => Ok(owners.into_iter().next()),
        _ => Err(ModelError::NoOutputOwner(sig.invariant.clone())),
    }
}

/// An exchange/process split proposed for an invariant that mixes
/// components. Ids are left at 0 for assembly to assign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub exchange: Invariant,
    pub process: Invariant,
    pub kind: DecompositionKind,
}

/// Splits `inv` into an exchange moving every foreign component's inputs to
/// the computing component, and a local process producing the outputs.
/// Returns `None` when the invariant already lives in one component.
pub fn propose_refinement(inv: &Invariant) -> Result<Option<Refinement>, ModelError> {
    if !needs_exchange(&inv.signature) {
        return Ok(None);
    }
    let owner = output_owner(&inv.signature)?.ok_or_else(|| ModelError::NoOutputOwner(inv.signature.invariant.clone()))?;
    let foreign: Vec<&KnowledgeParameter> = inv.signature.inputs().filter(|p| p.component != owner).collect();
    let mut exchange = FlowSignature::new(format!("{}/exchange", inv.signature.invariant), Some(InvariantType::Exchange));
    exchange.params.extend(foreign.iter().map(|p| KnowledgeParameter::new(&p.attr(), Direction::In)));
    exchange.params.push(KnowledgeParameter::new(&AttrRef::placeholder(owner), Direction::Out));
    let moved: Vec<String> = foreign.iter().map(|p| p.attr().to_string()).collect();
    let mut process = inv.signature.clone();
    process.invariant = format!("{}/process", inv.signature.invariant);
    process.invariant_type = Some(InvariantType::Process);
    let outputs: Vec<String> = inv.signature.outputs().map(|p| p.attr().to_string()).collect();
    let inputs: Vec<String> = inv.signature.inputs().map(|p| p.attr().to_string()).collect();
    let base = |description: String, invariant_type, signature| Invariant {
        id: 0,
        description,
        invariant_type,
        signature,
        trace: inv.trace.clone(),
        origin: Origin::Proposed,
        system_output: false,
        condition: None,
        timing: None,
    };
    Ok(Some(Refinement {
        exchange: base(format!("{} is propagated to {owner}", moved.join(", ")), InvariantType::Exchange, exchange),
        process: base(format!("{} computed from {}", outputs.join(", "), inputs.join(", ")), InvariantType::Process, process),
        kind: DecompositionKind::And,
    }))
}

/// Situation-specific requirements whose main clauses produce the same
/// knowledge; each becomes an alternative of one OR decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SituationGroup {
    /// `(assumption id, main id)` pairs in document order.
    pub members: Vec<(String, String)>,
    pub outputs: BTreeSet<AttrRef>,
}

impl SituationGroup {
    /// A single situation cannot form an OR; the designer should look.
    pub fn is_degenerate(&self) -> bool {
        self.members.len() < 2
    }

    pub fn items(&self) -> Vec<&str> {
        self.members.iter().map(|(_, m)| m.as_str()).collect()
    }
}

/// Pairs every split situation-specific requirement with its assumption and
/// groups the pairs by their set of (named) outputs.
pub fn group_situations(reqs: &[ClassifiedRequirement], sigs: &[FlowSignature]) -> Vec<SituationGroup> {
    let sig_of = |id: &str| sigs.iter().find(|s| s.invariant == id);
    let mut groups: Vec<SituationGroup> = Vec::new();
    for a in reqs.iter().filter(|r| r.is_assumption() && r.section == SectionKind::SituationSpecific) {
        let Some(main) = reqs.iter().find(|r| r.id == a.item_id && !r.is_assumption()) else { continue };
        let outputs: BTreeSet<AttrRef> =
            sig_of(&main.id).map(|s| s.outputs().filter(|p| !p.is_placeholder()).map(|p| p.attr()).collect()).unwrap_or_default();
        let pair = (a.id.clone(), main.id.clone());
        match groups.iter_mut().find(|g| g.outputs == outputs && !outputs.is_empty()) {
            Some(g) => g.members.push(pair),
            None => groups.push(SituationGroup { members: vec![pair], outputs }),
        }
    }
    groups
}
