//! Knowledge-flow checks over every configuration of a model.
//!
//! A configuration picks one alternative under every OR reached from the
//! roots. Inside a configuration every input must be produced, no
//! attribute may have two writers, and outputs nobody reads are reported.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::extract::AttrRef;
use crate::model::{canonical_json, serialize, DecompositionKind, IrmModel};

pub const DEFAULT_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidateError {
    #[error("model has {count} configurations, more than the cap of {cap}")]
    ConfigurationExplosion { count: u128, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    /// 1-based, in enumeration order.
    pub id: usize,
    pub selected: BTreeSet<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FindingKind {
    MissingInput,
    MultipleWriters,
    UnusedOutput,
    UnusedAttribute,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingKind::MissingInput => "MissingInput",
            FindingKind::MultipleWriters => "MultipleWriters",
            FindingKind::UnusedOutput => "UnusedOutput",
            FindingKind::UnusedAttribute => "UnusedAttribute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    /// `None` for model-wide findings.
    pub configuration: Option<usize>,
    pub subject: String,
    pub involved: Vec<u32>,
    pub severity: Severity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Warnings,
    Errors,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// SHA-256 of the canonical model document.
    pub model_sha256: String,
    pub configurations_examined: usize,
    pub configurations: Vec<Configuration>,
    pub findings: Vec<Finding>,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn to_json(&self) -> String {
        canonical_json(self)
    }

    /// Plain-text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "verdict: {}\nconfigurations: {}\n",
            match self.verdict {
                Verdict::Pass => "pass",
                Verdict::Warnings => "warnings",
                Verdict::Errors => "errors",
            },
            self.configurations_examined
        );
        for c in &self.configurations {
            let ids: Vec<String> = c.selected.iter().map(u32::to_string).collect();
            out.push_str(&format!("  #{}: {}\n", c.id, ids.join(" ")));
        }
        if self.findings.is_empty() {
            out.push_str("findings: none\n");
        } else {
            out.push_str(&format!("findings: {}\n", self.findings.len()));
        }
        for f in &self.findings {
            let ids: Vec<String> = f.involved.iter().map(u32::to_string).collect();
            let config = f.configuration.map(|c| format!("#{c}")).unwrap_or_else(|| "all".into());
            let severity = match f.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            out.push_str(&format!("  {severity:7} {:15} {config:>4}  {}  [{}]\n", f.kind.to_string(), f.subject, ids.join(", ")));
        }
        out
    }
}

fn children(model: &IrmModel) -> BTreeMap<u32, (DecompositionKind, Vec<u32>)> {
    model.decompositions.iter().map(|d| (d.parent, (d.kind, d.children.clone()))).collect()
}

fn count(node: u32, kids: &BTreeMap<u32, (DecompositionKind, Vec<u32>)>) -> u128 {
    match kids.get(&node) {
        None => 1,
        Some((DecompositionKind::And, cs)) => cs.iter().map(|c| count(*c, kids)).fold(1u128, |a, b| a.saturating_mul(b)),
        Some((DecompositionKind::Or, cs)) => cs.iter().map(|c| count(*c, kids)).fold(0u128, |a, b| a.saturating_add(b)),
    }
}

fn expand(node: u32, kids: &BTreeMap<u32, (DecompositionKind, Vec<u32>)>) -> Vec<BTreeSet<u32>> {
    let mut out = match kids.get(&node) {
        None => vec![BTreeSet::new()],
        Some((DecompositionKind::And, cs)) => product(cs.iter().map(|c| expand(*c, kids)).collect()),
        Some((DecompositionKind::Or, cs)) => cs.iter().flat_map(|c| expand(*c, kids)).collect(),
    };
    for s in &mut out {
        s.insert(node);
    }
    out
}

fn product(parts: Vec<Vec<BTreeSet<u32>>>) -> Vec<BTreeSet<u32>> {
    let mut acc = vec![BTreeSet::new()];
    for part in parts {
        let mut next = Vec::with_capacity(acc.len() * part.len());
        for a in &acc {
            for p in &part {
                next.push(a.union(p).copied().collect());
            }
        }
        acc = next;
    }
    acc
}

/// All configurations, depth-first in child order. Fails when there
/// would be more than `cap`.
pub fn enumerate_configurations(model: &IrmModel, cap: usize) -> Result<Vec<Configuration>, ValidateError> {
    let kids = children(model);
    let roots = model.roots();
    let total = roots.iter().map(|r| count(*r, &kids)).fold(1u128, |a, b| a.saturating_mul(b));
    if total > cap as u128 {
        return Err(ValidateError::ConfigurationExplosion { count: total, cap });
    }
    let sets = product(roots.iter().map(|r| expand(*r, &kids)).collect());
    Ok(sets.into_iter().enumerate().map(|(i, selected)| Configuration { id: i + 1, selected }).collect())
}

/// `(inputs, outputs)` of the selected invariants, by attribute.
fn flow_table(config: &Configuration, model: &IrmModel) -> (BTreeMap<AttrRef, Vec<u32>>, BTreeMap<AttrRef, Vec<u32>>) {
    let mut ins: BTreeMap<AttrRef, Vec<u32>> = BTreeMap::new();
    let mut outs: BTreeMap<AttrRef, Vec<u32>> = BTreeMap::new();
    for inv in model.invariants.iter().filter(|i| config.selected.contains(&i.id)) {
        for p in inv.signature.inputs() {
            ins.entry(p.attr()).or_default().push(inv.id);
        }
        for p in inv.signature.outputs() {
            outs.entry(p.attr()).or_default().push(inv.id);
        }
    }
    (ins, outs)
}

/// Every input of a selected invariant needs a selected producer. Inputs
/// that are placeholders cannot be checked and are reported as warnings.
pub fn check_missing_inputs(config: &Configuration, model: &IrmModel) -> Vec<Finding> {
    let (ins, outs) = flow_table(config, model);
    let mut findings = Vec::new();
    for (attr, consumers) in ins {
        let placeholder = attr.is_placeholder();
        if !placeholder && outs.contains_key(&attr) {
            continue;
        }
        findings.push(Finding {
            kind: FindingKind::MissingInput,
            configuration: Some(config.id),
            subject: attr.to_string(),
            involved: consumers,
            severity: if placeholder { Severity::Warning } else { Severity::Error },
        });
    }
    findings
}

/// At most one selected writer per attribute.
pub fn check_multiple_writers(config: &Configuration, model: &IrmModel) -> Vec<Finding> {
    let (_, outs) = flow_table(config, model);
    outs.into_iter()
        .filter(|(attr, writers)| !attr.is_placeholder() && writers.len() >= 2)
        .map(|(attr, writers)| Finding {
            kind: FindingKind::MultipleWriters,
            configuration: Some(config.id),
            subject: attr.to_string(),
            involved: writers,
            severity: Severity::Error,
        })
        .collect()
}

/// Outputs nobody in the configuration reads, unless their writer is
/// flagged as producing a system output.
pub fn check_unused_outputs(config: &Configuration, model: &IrmModel) -> Vec<Finding> {
    let (ins, outs) = flow_table(config, model);
    let exempt: BTreeSet<u32> = model.invariants.iter().filter(|i| i.system_output).map(|i| i.id).collect();
    outs.into_iter()
        .filter(|(attr, _)| !attr.is_placeholder() && !ins.contains_key(attr))
        .filter_map(|(attr, writers)| {
            let writers: Vec<u32> = writers.into_iter().filter(|w| !exempt.contains(w)).collect();
            (!writers.is_empty()).then(|| Finding {
                kind: FindingKind::UnusedOutput,
                configuration: Some(config.id),
                subject: attr.to_string(),
                involved: writers,
                severity: Severity::Warning,
            })
        })
        .collect()
}

/// Catalog attributes no signature mentions. Model-wide, so `involved`
/// is empty.
pub fn check_unused_attributes(model: &IrmModel) -> Vec<Finding> {
    let used: BTreeSet<AttrRef> = model.invariants.iter().flat_map(|i| i.signature.params.iter().map(|p| p.attr())).collect();
    let mut findings = Vec::new();
    for c in &model.components {
        for a in &c.attributes {
            let attr = AttrRef::new(&c.name, &a.key);
            if !used.contains(&attr) {
                findings.push(Finding {
                    kind: FindingKind::UnusedAttribute,
                    configuration: None,
                    subject: attr.to_string(),
                    involved: Vec::new(),
                    severity: Severity::Warning,
                });
            }
        }
    }
    findings
}

/// Runs every check over every configuration. Findings repeating in later
/// configurations with the same kind, subject and invariants are kept once.
pub fn validate(model: &IrmModel, cap: usize) -> Result<ValidationReport, ValidateError> {
    let configurations = enumerate_configurations(model, cap)?;
    let mut findings: Vec<Finding> = Vec::new();
    let mut seen: BTreeSet<(FindingKind, String, Vec<u32>)> = BTreeSet::new();
    let per_config = configurations.iter().flat_map(|c| {
        let mut f = check_missing_inputs(c, model);
        f.extend(check_multiple_writers(c, model));
        f.extend(check_unused_outputs(c, model));
        f
    });
    for f in per_config.chain(check_unused_attributes(model)) {
        if seen.insert((f.kind, f.subject.clone(), f.involved.clone())) {
            findings.push(f);
        }
    }
    findings.sort_by(|a, b| {
        (a.configuration.unwrap_or(usize::MAX), a.kind, &a.subject).cmp(&(b.configuration.unwrap_or(usize::MAX), b.kind, &b.subject))
    });
    let verdict = if findings.iter().any(|f| f.severity == Severity::Error) {
        Verdict::Errors
    } else if findings.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Warnings
    };
    Ok(ValidationReport {
        model_sha256: hex::encode(Sha256::digest(serialize(model).as_bytes())),
        configurations_examined: configurations.len(),
        configurations,
        findings,
        verdict,
    })
}
