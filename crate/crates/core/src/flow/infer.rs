//! Parameter collection and direction inference.

use std::collections::{BTreeMap, BTreeSet};

use crate::classify::{ClassifiedRequirement, InvariantType};
use crate::extract::{AttrRef, ComponentCatalog, Mention};

use super::{Basis, DecisionJournal, DecisionKind, DecisionRequest, Direction, Evidence, FlowError, FlowSignature, KnowledgeParameter};

/// Journal target for the direction of one parameter.
pub fn direction_target(invariant: &str, attr: &AttrRef) -> String {
    format!("{invariant}@{attr}")
}

/// Splits `<invariant>@<Component>::<attribute>`.
pub fn parse_direction_target(target: &str) -> Option<(&str, AttrRef)> {
    let (inv, param) = target.split_once('@')?;
    let (c, a) = param.split_once("::")?;
    (!inv.is_empty() && !c.is_empty() && !a.is_empty()).then(|| (inv, AttrRef::new(c, a)))
}

fn mention_in(req: &ClassifiedRequirement, m: &Mention) -> Option<(usize, usize)> {
    let s = req.sentences.iter().position(|s| *s == m.sentence_id)?;
    let clause = req.clauses.iter().find(|c| c.sentence_id == m.sentence_id)?;
    clause.tokens.contains(&m.head).then_some((s, m.head))
}

/// One undecided parameter per catalog attribute mentioned in the
/// requirement's clause. Assumptions also read what their condition
/// measures. An exchange invariant gets a `C::?` placeholder for every
/// component it names without naming one of its attributes. Parameters
/// come in catalog order.
pub fn collect_params(req: &ClassifiedRequirement, catalog: &ComponentCatalog) -> FlowSignature {
    // (component index, attribute index or MAX for a placeholder) → first mention
    let mut found: BTreeMap<(usize, usize), (AttrRef, (usize, usize))> = BTreeMap::new();
    let mut named: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (ci, c) in catalog.components.iter().enumerate() {
        for (ai, a) in c.attributes.iter().enumerate() {
            if let Some(at) = a.mentions.iter().filter_map(|m| mention_in(req, m)).min() {
                found.insert((ci, ai), (AttrRef::new(&c.name, &a.key), at));
            }
        }
        if let Some(at) = c.mentions.iter().filter_map(|m| mention_in(req, m)).min() {
            named.insert(ci, at);
        }
    }
    if let Some(cond) = &req.condition {
        for attr in cond.inputs() {
            let Some(ci) = catalog.component_index(&attr.component) else { continue };
            // A condition may measure knowledge the catalog does not hold
            // (yet); only catalog attributes become parameters.
            let Some(ai) = catalog.components[ci].attributes.iter().position(|a| a.key == attr.attribute) else { continue };
            found.entry((ci, ai)).or_insert((attr, (0, 0)));
        }
    }
    if req.invariant_type == Some(InvariantType::Exchange) {
        for (ci, at) in named {
            if !found.keys().any(|(c, _)| *c == ci) {
                found.insert((ci, usize::MAX), (AttrRef::placeholder(&catalog.components[ci].name), at));
            }
        }
    }
    let mut sig = FlowSignature::new(&req.id, req.invariant_type);
    sig.params = found.into_values().map(|(a, _)| KnowledgeParameter::new(&a, Direction::Undecided)).collect();
    sig
}

fn needs_output(sig: &FlowSignature) -> bool {
    matches!(sig.invariant_type, Some(InvariantType::Process) | Some(InvariantType::Exchange))
}

/// Iterates three rules to a fixpoint: journal answers first, then the
/// single-parameter rule (a lone parameter of a process invariant is its
/// output), then the produced-elsewhere rule (knowledge another invariant
/// writes is an input here). Each round computes every rule against the
/// state at the start of the round, so the outcome does not depend on
/// signature order.
///
/// The produced-elsewhere rule never decides the last open parameter of a
/// process or exchange invariant that has no output yet, and placeholders
/// are never decided automatically. Whatever stays open, plus every
/// produced-elsewhere guess, becomes a decision request.
pub fn infer_directions(
    sigs: &[FlowSignature],
    journal: &DecisionJournal,
) -> Result<(Vec<FlowSignature>, Vec<DecisionRequest>), FlowError> {
    let mut sigs: Vec<FlowSignature> = sigs.to_vec();

    // The journal first; it may also add placeholders.
    for (target, entry) in journal.effective_of(DecisionKind::Direction) {
        let Some((inv, attr)) = parse_direction_target(target) else { continue };
        let direction = Direction::parse(&entry.choice)
            .ok_or_else(|| FlowError::BadChoice { target: target.to_string(), choice: entry.choice.clone() })?;
        let Some(sig) = sigs.iter_mut().find(|s| s.invariant == inv) else { continue };
        match sig.params.iter_mut().find(|p| p.component == attr.component && p.attribute == attr.attribute) {
            Some(p) => {
                p.direction = direction;
                p.basis = if direction == Direction::Undecided { Basis::None } else { Basis::Journal };
            }
            None if attr.is_placeholder() && direction != Direction::Undecided => {
                let mut p = KnowledgeParameter::new(&attr, direction);
                p.basis = Basis::Journal;
                sig.params.push(p);
            }
            None => {}
        }
    }

    for sig in sigs.iter_mut().filter(|s| s.invariant_type == Some(InvariantType::Assumption)) {
        for p in sig.params.iter_mut().filter(|p| p.direction == Direction::Undecided) {
            p.direction = Direction::In;
            p.basis = Basis::Assumption;
        }
    }

    let mut conflicts: BTreeSet<(usize, AttrRef)> = BTreeSet::new();
    let mut blocked: BTreeSet<usize> = BTreeSet::new();
    loop {
        let mut writers: BTreeMap<AttrRef, BTreeSet<usize>> = BTreeMap::new();
        for (i, s) in sigs.iter().enumerate() {
            for p in s.outputs().filter(|p| !p.is_placeholder()) {
                writers.entry(p.attr()).or_default().insert(i);
            }
        }
        let written_elsewhere = |attr: &AttrRef, me: usize| writers.get(attr).is_some_and(|w| w.iter().any(|&i| i != me));

        // Single-parameter candidates, grouped by attribute.
        let mut lone: BTreeMap<AttrRef, Vec<usize>> = BTreeMap::new();
        for (i, s) in sigs.iter().enumerate() {
            if s.invariant_type == Some(InvariantType::Process) && s.params.len() == 1 {
                let p = &s.params[0];
                if p.direction == Direction::Undecided && !p.is_placeholder() {
                    lone.entry(p.attr()).or_default().push(i);
                }
            }
        }
        let mut changes: Vec<(usize, AttrRef, Direction, Basis)> = Vec::new();
        for (attr, owners) in &lone {
            for &i in owners {
                if owners.len() > 1 || written_elsewhere(attr, i) {
                    conflicts.insert((i, attr.clone()));
                } else {
                    changes.push((i, attr.clone(), Direction::Out, Basis::SingleParameter));
                }
            }
        }

        for (i, s) in sigs.iter().enumerate() {
            if s.invariant_type == Some(InvariantType::Assumption) {
                continue;
            }
            let open: Vec<AttrRef> = s.undecided().map(|p| p.attr()).collect();
            let eligible: Vec<&AttrRef> =
                open.iter().filter(|a| !a.is_placeholder() && !conflicts.contains(&(i, (*a).clone())) && written_elsewhere(a, i)).collect();
            if eligible.is_empty() {
                continue;
            }
            if needs_output(s) && s.outputs().next().is_none() && eligible.len() == open.len() {
                blocked.insert(i);
                continue;
            }
            changes.extend(eligible.into_iter().map(|a| (i, a.clone(), Direction::In, Basis::SharedAttribute)));
        }

        if changes.is_empty() {
            break;
        }
        for (i, attr, direction, basis) in changes {
            if let Some(p) = sigs[i].params.iter_mut().find(|p| p.attr() == attr && p.direction == Direction::Undecided) {
                p.direction = direction;
                p.basis = basis;
            }
        }
    }

    let mut writers: BTreeMap<AttrRef, Vec<&str>> = BTreeMap::new();
    for s in &sigs {
        for p in s.outputs().filter(|p| !p.is_placeholder()) {
            writers.entry(p.attr()).or_default().push(&s.invariant);
        }
    }
    let mut requests = Vec::new();
    for (i, s) in sigs.iter().enumerate() {
        for p in &s.params {
            let attr = p.attr();
            let target = direction_target(&s.invariant, &attr);
            let producers: Vec<&str> =
                writers.get(&attr).map(|w| w.iter().copied().filter(|w| *w != s.invariant).collect()).unwrap_or_default();
            let mut req = match (p.direction, p.basis) {
                (Direction::In, Basis::SharedAttribute) => {
                    let mut r = DecisionRequest::new(DecisionKind::Direction, &target, "in");
                    r.blocking = false;
                    r.evidence.push(Evidence::new("shared_attribute").note(format!("produced by {}", producers.join(", "))));
                    r
                }
                (Direction::Undecided, _) => {
                    let conflict = conflicts.contains(&(i, attr.clone()));
                    let suggested = if !conflict && !producers.is_empty() { "in" } else { "out" };
                    let mut r = DecisionRequest::new(DecisionKind::Direction, &target, suggested);
                    if conflict {
                        let note = if producers.is_empty() {
                            "only parameter here and in other process invariants".to_string()
                        } else {
                            format!("only parameter here, but already produced by {}", producers.join(", "))
                        };
                        r.evidence.push(Evidence::new("single_parameter_conflict").note(note));
                    } else if p.is_placeholder() {
                        r.evidence.push(Evidence::new("placeholder").note(format!("knowledge of {} not named", p.component)));
                    } else if blocked.contains(&i) {
                        r.evidence.push(Evidence::new("no_output").note("every parameter is produced elsewhere"));
                    } else {
                        r.evidence.push(Evidence::new("undecided"));
                    }
                    r
                }
                _ => continue,
            };
            req = req.options(["in", "out"]);
            requests.push(req);
        }
    }
    for s in sigs.iter_mut() {
        s.normalize();
    }
    Ok((sigs, requests))
}
