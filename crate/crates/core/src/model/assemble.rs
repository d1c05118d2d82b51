//! Composition proposals and model assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifiedRequirement, InvariantType};
use crate::extract::{AttrRef, ComponentCatalog};
use crate::flow::{parse_signature, DecisionJournal, DecisionKind, DecisionRequest, Evidence, FlowSignature};
use crate::text::RequirementsDocument;

use super::{
    group_situations, needs_exchange, output_owner, propose_refinement, Decomposition, DecompositionKind, Invariant, IrmModel, JournalRef,
    ModelComponent, ModelError, Origin, SituationGroup, Trace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    /// Situation alternatives with the same outputs under one OR.
    SituationGroup,
    /// Split of an invariant that spans components.
    Refinement,
    /// Copy of an exchange into every alternative that needs it.
    DuplicateExchange,
}

impl ProposalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProposalKind::SituationGroup => "situation_group",
            ProposalKind::Refinement => "refinement",
            ProposalKind::DuplicateExchange => "duplicate_exchange",
        }
    }
}

impl fmt::Display for ProposalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Journal target of a composition proposal, e.g. `situation_group:4,5`.
pub fn proposal_target(kind: ProposalKind, subjects: &[&str]) -> String {
    format!("{kind}:{}", subjects.join(","))
}

/// Journal target flagging the outputs of an item as system outputs.
pub fn system_output_target(item: &str) -> String {
    format!("system_output:{item}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub kind: ProposalKind,
    pub target: String,
    pub description: String,
    /// Requirement items the proposal is about.
    pub items: Vec<String>,
    /// Refinements only: the situation group realizing the invariant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via_group: Option<String>,
    /// Refinements only: an existing exchange invariant that moves the
    /// foreign knowledge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<String>,
    /// Why the proposal cannot simply be accepted, if so.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub groups: Vec<SituationGroup>,
    pub proposals: Vec<Proposal>,
    pub requests: Vec<DecisionRequest>,
}

/// Source text of a requirement's clauses, without stray punctuation at
/// the clause edges. A sub-item's text leaves out the lead-in it was
/// parsed with.
pub fn requirement_text(doc: &RequirementsDocument, req: &ClassifiedRequirement) -> String {
    let mut parts = Vec::new();
    for clause in &req.clauses {
        let Some(g) = doc.graphs.get(&clause.sentence_id) else { continue };
        let mut toks: Vec<_> = clause.tokens.iter().filter_map(|&i| g.token(i)).collect();
        if let Some((s, e)) = doc.sentence(&clause.sentence_id).and_then(|s| s.stem) {
            let body: Vec<_> = toks.iter().copied().filter(|t| t.char_span.0 < s || t.char_span.0 >= e).collect();
            if !body.is_empty() {
                toks = body;
            }
        }
        let is_punct = |s: &str| !s.chars().any(char::is_alphanumeric);
        let start = toks.iter().position(|t| !is_punct(&t.surface));
        let end = toks.iter().rposition(|t| !is_punct(&t.surface) || t.surface == "." || t.surface == ")");
        if let (Some(s), Some(e)) = (start, end) {
            if let Some(text) = doc.source.get(toks[s].char_span.0..toks[e].char_span.1) {
                parts.push(text.to_string());
            }
        }
    }
    parts.join(" ")
}

fn named_outputs(sig: &FlowSignature) -> BTreeSet<AttrRef> {
    sig.outputs().filter(|p| !p.is_placeholder()).map(|p| p.attr()).collect()
}

fn list(attrs: &BTreeSet<AttrRef>) -> String {
    attrs.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

/// An exchange invariant that reads every foreign input and writes to the
/// computing component.
fn existing_exchange<'a>(sigs: &'a [FlowSignature], foreign: &BTreeSet<AttrRef>, owner: &str) -> Option<&'a FlowSignature> {
    sigs.iter().find(|s| {
        s.invariant_type == Some(InvariantType::Exchange)
            && foreign.iter().all(|a| s.inputs().any(|p| p.attr() == *a))
            && s.outputs().any(|p| p.component == owner)
    })
}

/// Everything composition would do, as proposals for the designer. Nothing
/// here changes the model; [`assemble`] applies what the journal accepts.
pub fn compose(
    reqs: &[ClassifiedRequirement],
    sigs: &[FlowSignature],
    doc: &RequirementsDocument,
    journal: &DecisionJournal,
) -> Result<Composition, ModelError> {
    if let Some(open) = sigs.iter().find(|s| !s.is_finalized()) {
        return Err(ModelError::UnfinishedSignature(open.invariant.clone()));
    }
    let groups = group_situations(reqs, sigs);
    let mut proposals = Vec::new();
    for g in &groups {
        let items = g.items();
        let description = if g.is_degenerate() {
            format!("Situation {} is the only alternative producing {}", items[0], list(&g.outputs))
        } else {
            format!("Alternative: {} maintained", list(&g.outputs))
        };
        proposals.push(Proposal {
            kind: ProposalKind::SituationGroup,
            target: proposal_target(ProposalKind::SituationGroup, &items),
            description,
            items: items.iter().map(|s| s.to_string()).collect(),
            via_group: None,
            exchange: None,
            problem: g.is_degenerate().then(|| "a single situation cannot form an OR".to_string()),
        });
    }

    for sig in sigs {
        if sig.invariant_type != Some(InvariantType::Process) || !needs_exchange(sig) {
            continue;
        }
        let target = proposal_target(ProposalKind::Refinement, &[&sig.invariant]);
        let owner = match output_owner(sig) {
            Ok(Some(o)) => o,
            Ok(None) | Err(_) => {
                proposals.push(Proposal {
                    kind: ProposalKind::Refinement,
                    target,
                    description: format!("Refine {} into exchange and process", sig.invariant),
                    items: vec![sig.invariant.clone()],
                    via_group: None,
                    exchange: None,
                    problem: Some("outputs do not belong to exactly one component".into()),
                });
                continue;
            }
        };
        let foreign: BTreeSet<AttrRef> = sig.inputs().filter(|p| p.component != owner).map(|p| p.attr()).collect();
        let outputs = named_outputs(sig);
        let group = groups.iter().find(|g| !g.outputs.is_empty() && g.outputs == outputs);
        let exchange = existing_exchange(sigs, &foreign, owner);
        let moved = list(&foreign);
        let description = match (group, exchange) {
            (Some(g), _) => format!("Realize {} through the situations {}", sig.invariant, g.items().join(", ")),
            (None, Some(e)) => format!("Refine {} into exchange {} and a local process on {owner}", sig.invariant, e.invariant),
            (None, None) => format!("Refine {} into \"{moved} is propagated to {owner}\" and a local process", sig.invariant),
        };
        let group_target = group.map(|g| proposal_target(ProposalKind::SituationGroup, &g.items()));
        proposals.push(Proposal {
            kind: ProposalKind::Refinement,
            target,
            description,
            items: vec![sig.invariant.clone()],
            via_group: group_target.clone(),
            exchange: exchange.map(|e| e.invariant.clone()),
            problem: None,
        });
        if let Some(g) = group {
            let source = exchange.map(|e| e.invariant.clone()).unwrap_or_else(|| format!("{}/exchange", sig.invariant));
            let target = proposal_target(ProposalKind::DuplicateExchange, &[&source]);
            if proposals.iter().any(|p| p.target == target) {
                continue;
            }
            proposals.push(Proposal {
                kind: ProposalKind::DuplicateExchange,
                target,
                description: format!("Copy exchange {source} ({moved} to {owner}) into each situation of {}", g.items().join(", ")),
                items: exchange.map(|e| vec![e.invariant.clone()]).unwrap_or_default(),
                via_group: group_target,
                exchange: exchange.map(|e| e.invariant.clone()),
                problem: None,
            });
        }
    }

    let mut requests = Vec::new();
    for p in &proposals {
        if journal.choice(DecisionKind::Composition, &p.target).is_some() {
            continue;
        }
        let suggested = if p.problem.is_some() && p.kind == ProposalKind::Refinement { "" } else { "accept" };
        let mut r = DecisionRequest::new(DecisionKind::Composition, &p.target, suggested).options(["accept", "reject"]);
        r.evidence.push(Evidence::new(p.kind.as_str()).note(p.description.clone()));
        if let Some(problem) = &p.problem {
            r.evidence.push(Evidence::new("problem").note(problem.clone()));
        }
        let sentences: Vec<String> = p.items.iter().filter_map(|i| doc.item(i)).flat_map(|i| i.sentences.iter().cloned()).collect();
        crate::classify::excerpt(doc, &mut r, &sentences);
        requests.push(r);
    }
    Ok(Composition { groups, proposals, requests })
}

#[derive(Debug, Clone)]
struct Node {
    inv: Invariant,
    /// Document position used to order roots and siblings.
    order: usize,
    root_ok: bool,
}

struct Builder {
    nodes: BTreeMap<String, Node>,
    children: BTreeMap<String, (DecompositionKind, Vec<String>)>,
}

impl Builder {
    fn replace_child(&mut self, old: &str, new: &str) -> bool {
        for (_, kids) in self.children.values_mut() {
            if let Some(pos) = kids.iter().position(|k| k == old) {
                kids[pos] = new.to_string();
                return true;
            }
        }
        false
    }

    fn remove_child(&mut self, key: &str) {
        for (_, kids) in self.children.values_mut() {
            kids.retain(|k| k != key);
        }
    }

    fn has_parent(&self, key: &str) -> bool {
        self.children.values().any(|(_, kids)| kids.iter().any(|k| k == key))
    }
}

enum Answer {
    Accept,
    Manual(String),
}

fn answer(journal: &DecisionJournal, p: &Proposal) -> Result<Answer, ModelError> {
    match journal.choice(DecisionKind::Composition, &p.target) {
        None | Some("reject") => Err(ModelError::UnresolvedProposal(p.target.clone())),
        Some("accept") if p.problem.is_none() || p.kind == ProposalKind::SituationGroup => Ok(Answer::Accept),
        Some(choice) => match choice.strip_prefix("manual:") {
            Some(spec) if p.kind == ProposalKind::Refinement => Ok(Answer::Manual(spec.trim().to_string())),
            _ => Err(ModelError::BadChoice { target: p.target.clone(), choice: choice.to_string() }),
        },
    }
}

/// `Process | E-Car::energy -> E-Car::plan | Compute the plan`
fn manual_invariant(spec: &str, target: &str, catalog: &ComponentCatalog) -> Result<Invariant, ModelError> {
    let bad = || ModelError::BadChoice { target: target.to_string(), choice: format!("manual: {spec}") };
    let parts: Vec<&str> = spec.splitn(3, '|').map(str::trim).collect();
    let [ty, sig, description] = parts[..] else { return Err(bad()) };
    let invariant_type: InvariantType = ty.parse().map_err(|_| bad())?;
    let mut signature = parse_signature(sig, catalog).map_err(|_| bad())?;
    signature.invariant = format!("{target}/manual");
    signature.invariant_type = Some(invariant_type);
    if description.is_empty() {
        return Err(bad());
    }
    Ok(Invariant {
        id: 0,
        description: description.to_string(),
        invariant_type,
        signature,
        trace: Vec::new(),
        origin: Origin::Manual,
        system_output: false,
        condition: None,
        timing: None,
    })
}

fn proposed_node(key: &str, description: String) -> Invariant {
    Invariant {
        id: 0,
        description,
        invariant_type: InvariantType::Abstract,
        signature: FlowSignature::new(key, Some(InvariantType::Abstract)),
        trace: Vec::new(),
        origin: Origin::Proposed,
        system_output: false,
        condition: None,
        timing: None,
    }
}

fn merge_signatures(base: &FlowSignature, extra: &FlowSignature) -> FlowSignature {
    let mut merged = base.clone();
    merged.invariant = extra.invariant.clone();
    merged.invariant_type = extra.invariant_type;
    for p in &extra.params {
        if merged.param(&p.attr()).is_none() {
            merged.params.push(p.clone());
        }
    }
    merged.normalize();
    merged
}

/// Builds the model from classified requirements, finalized signatures and
/// the designer's composition answers. Every proposal needs an accepting
/// journal entry (or, for refinements, a manual replacement).
pub fn assemble(
    reqs: &[ClassifiedRequirement],
    sigs: &[FlowSignature],
    doc: &RequirementsDocument,
    catalog: &ComponentCatalog,
    journal: &DecisionJournal,
) -> Result<IrmModel, ModelError> {
    let composition = compose(reqs, sigs, doc, journal)?;
    let item_order: BTreeMap<&str, usize> = doc.requirement_items.iter().map(|i| (i.item_id.as_str(), i.order)).collect();
    let top_level: BTreeSet<&str> = doc.requirement_items.iter().filter(|i| i.parent.is_none()).map(|i| i.item_id.as_str()).collect();
    let sig_of = |id: &str| sigs.iter().find(|s| s.invariant == id).cloned();

    let mut b = Builder { nodes: BTreeMap::new(), children: BTreeMap::new() };
    for r in reqs {
        let signature = sig_of(&r.id).unwrap_or_else(|| FlowSignature::new(&r.id, r.invariant_type));
        let Some(invariant_type) = r.invariant_type else { return Err(ModelError::UnfinishedSignature(r.id.clone())) };
        let trace = r
            .clauses
            .iter()
            .filter_map(|c| {
                let g = doc.graphs.get(&c.sentence_id)?;
                let first = g.token(*c.tokens.first()?)?;
                let last = g.token(*c.tokens.last()?)?;
                Some(Trace { item_id: r.item_id.clone(), sentence_id: c.sentence_id.clone(), span: (first.char_span.0, last.char_span.1) })
            })
            .collect();
        let inv = Invariant {
            id: 0,
            description: requirement_text(doc, r),
            invariant_type,
            signature,
            trace,
            origin: Origin::Extracted,
            system_output: false,
            condition: r.condition.clone(),
            timing: r.timing.clone(),
        };
        let order = item_order.get(r.item_id.as_str()).copied().unwrap_or(usize::MAX);
        b.nodes.insert(r.id.clone(), Node { inv, order, root_ok: top_level.contains(r.item_id.as_str()) });
    }

    // Outline structure: abstract items are the AND of their sub-items.
    for r in reqs.iter().filter(|r| r.invariant_type == Some(InvariantType::Abstract) && !r.children.is_empty()) {
        let kids: Vec<String> =
            r.children.iter().flat_map(|c| reqs.iter().filter(move |x| x.item_id == *c).map(|x| x.id.clone())).collect();
        if !kids.is_empty() {
            b.children.insert(r.id.clone(), (DecompositionKind::And, kids));
        }
    }

    // Situation alternatives.
    let mut group_top: BTreeMap<String, String> = BTreeMap::new();
    let mut group_nodes: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for p in composition.proposals.iter().filter(|p| p.kind == ProposalKind::SituationGroup) {
        answer(journal, p)?;
        let g = composition
            .groups
            .iter()
            .find(|g| proposal_target(ProposalKind::SituationGroup, &g.items()) == p.target)
            .expect("proposal made from group");
        let situations: Vec<String> = g.members.iter().map(|(_, m)| format!("situation:{m}")).collect();
        let top = if situations.len() >= 2 { format!("alternative:{}", g.items().join(",")) } else { situations[0].clone() };
        // Situations listed in an outline move under the new node.
        let mut placed = false;
        for (a, m) in &g.members {
            for k in [a, m] {
                if !placed && b.replace_child(k, &top) {
                    placed = true;
                } else {
                    b.remove_child(k);
                }
            }
        }
        for ((a, m), key) in g.members.iter().zip(&situations) {
            let cond = b.nodes.get(a).and_then(|n| n.inv.condition.as_ref()).map(|c| c.raw_text.clone()).unwrap_or_default();
            let order = b.nodes.get(m).map(|n| n.order).unwrap_or(usize::MAX);
            let inv = proposed_node(key, format!("Situation {m}: {cond}"));
            b.nodes.insert(key.clone(), Node { inv, order, root_ok: true });
            b.children.insert(key.clone(), (DecompositionKind::And, vec![a.clone(), m.clone()]));
        }
        if situations.len() >= 2 {
            let order = situations.iter().filter_map(|s| b.nodes.get(s)).map(|n| n.order).min().unwrap_or(usize::MAX);
            b.nodes.insert(top.clone(), Node { inv: proposed_node(&top, p.description.clone()), order, root_ok: true });
            b.children.insert(top.clone(), (DecompositionKind::Or, situations.clone()));
        }
        group_top.insert(p.target.clone(), top);
        group_nodes.insert(p.target.clone(), situations);
    }

    // Refinements of invariants that span components.
    for p in composition.proposals.iter().filter(|p| p.kind == ProposalKind::Refinement) {
        let x = p.items[0].clone();
        let ans = answer(journal, p)?;
        let x_inv = b.nodes.get(&x).map(|n| n.inv.clone()).ok_or_else(|| ModelError::DanglingInvariant(x.clone()))?;
        match ans {
            Answer::Manual(spec) => {
                let manual = manual_invariant(&spec, &x, catalog)?;
                let key = format!("manual:{x}");
                let order = b.nodes[&x].order;
                b.nodes.insert(key.clone(), Node { inv: manual, order, root_ok: false });
                b.children.insert(x.clone(), (DecompositionKind::And, vec![key]));
                let n = b.nodes.get_mut(&x).expect("present");
                n.inv.invariant_type = InvariantType::Abstract;
                n.inv.signature.params.clear();
            }
            Answer::Accept => {
                let refinement = propose_refinement(&x_inv)?.expect("proposal made only for cross-component signatures");
                match p.via_group.as_ref() {
                    Some(gt) => {
                        let top = group_top.get(gt).cloned().ok_or_else(|| ModelError::UnresolvedProposal(gt.clone()))?;
                        let dup = composition
                            .proposals
                            .iter()
                            .find(|d| d.kind == ProposalKind::DuplicateExchange && d.via_group.as_deref() == Some(gt.as_str()))
                            .expect("duplication proposed with the group");
                        answer(journal, dup)?;
                        let exchange_inv = match &p.exchange {
                            Some(e) => b.nodes.get(e).map(|n| n.inv.clone()).ok_or_else(|| ModelError::DanglingInvariant(e.clone()))?,
                            None => refinement.exchange.clone(),
                        };
                        let g = composition
                            .groups
                            .iter()
                            .find(|g| proposal_target(ProposalKind::SituationGroup, &g.items()) == *gt)
                            .expect("group");
                        for (situation, (_, m)) in group_nodes[gt].clone().iter().zip(&g.members) {
                            if let Some(node) = b.nodes.get_mut(m) {
                                node.inv.signature = merge_signatures(&x_inv.signature, &node.inv.signature);
                                let mut trace = x_inv.trace.clone();
                                trace.extend(node.inv.trace.iter().cloned());
                                node.inv.trace = trace;
                            }
                            let copy = format!("copy:{}@{m}", p.exchange.clone().unwrap_or_else(|| format!("{x}/exchange")));
                            let order = b.nodes.get(m).map(|n| n.order).unwrap_or(usize::MAX);
                            b.nodes.insert(copy.clone(), Node { inv: exchange_inv.clone(), order, root_ok: false });
                            b.children.get_mut(situation).expect("situation").1.push(copy);
                        }
                        if let Some(e) = &p.exchange {
                            b.remove_child(e);
                            b.nodes.remove(e);
                            b.children.remove(e);
                        }
                        b.remove_child(&top);
                        b.replace_child(&x, &top);
                        b.nodes.remove(&x);
                        b.children.remove(&x);
                    }
                    None => {
                        let mut kids = Vec::new();
                        match &p.exchange {
                            Some(e) => {
                                b.remove_child(e);
                                kids.push(e.clone());
                            }
                            None => {
                                let key = format!("{x}/exchange");
                                let order = b.nodes[&x].order;
                                b.nodes.insert(key.clone(), Node { inv: refinement.exchange.clone(), order, root_ok: false });
                                kids.push(key);
                            }
                        }
                        let key = format!("{x}/process");
                        let order = b.nodes[&x].order;
                        b.nodes.insert(key.clone(), Node { inv: refinement.process.clone(), order, root_ok: false });
                        kids.push(key);
                        b.children.insert(x.clone(), (DecompositionKind::And, kids));
                        let n = b.nodes.get_mut(&x).expect("present");
                        n.inv.invariant_type = InvariantType::Abstract;
                        n.inv.signature.params.clear();
                    }
                }
            }
        }
    }

    // System outputs.
    for (target, entry) in journal.effective_of(DecisionKind::Composition) {
        let Some(item) = target.strip_prefix("system_output:") else { continue };
        let flag = match entry.choice.as_str() {
            "accept" => true,
            "reject" => false,
            other => return Err(ModelError::BadChoice { target: target.to_string(), choice: other.to_string() }),
        };
        for n in b.nodes.values_mut().filter(|n| n.inv.trace.iter().any(|t| t.item_id == item)) {
            n.inv.system_output = flag;
        }
    }

    // Roots in document order, then a pre-order walk assigns ids.
    let mut roots: Vec<&String> = b.nodes.keys().filter(|k| !b.has_parent(k)).collect();
    for r in &roots {
        if !b.nodes[*r].root_ok {
            return Err(ModelError::DanglingInvariant((*r).clone()));
        }
    }
    roots.sort_by_key(|k| (b.nodes[*k].order, (*k).clone()));
    let mut ids: BTreeMap<String, u32> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut stack: Vec<String> = roots.iter().rev().map(|k| (*k).clone()).collect();
    while let Some(k) = stack.pop() {
        if ids.contains_key(&k) {
            continue;
        }
        ids.insert(k.clone(), order.len() as u32 + 1);
        order.push(k.clone());
        if let Some((_, kids)) = b.children.get(&k) {
            stack.extend(kids.iter().rev().cloned());
        }
    }
    let mut invariants = Vec::new();
    let mut decompositions = Vec::new();
    for k in &order {
        let mut inv = b.nodes[k].inv.clone();
        inv.id = ids[k];
        invariants.push(inv);
        if let Some((kind, kids)) = b.children.get(k) {
            decompositions.push(Decomposition { parent: ids[k], children: kids.iter().map(|c| ids[c]).collect(), kind: *kind });
        }
    }
    let mut model = IrmModel {
        components: ModelComponent::from_catalog(catalog),
        invariants,
        decompositions,
        traces: BTreeMap::new(),
        journal_ref: JournalRef { entries: journal.len(), sha256: journal.sha256() },
    };
    model.traces = model.trace_table();
    model.check()?;
    Ok(model)
}
