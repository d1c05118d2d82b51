//! Invariant typing of requirement items.
//!
//! An item with sub-items is abstract. A situation-specific item with a
//! "when/if/while" clause splits into an assumption (the clause) and a main
//! requirement. Everything else is typed by comparing the main verb's
//! lexical affinity to exchange seeds against process seeds.

mod condition;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::ComponentCatalog;
use crate::flow::{DecisionJournal, DecisionKind, DecisionRequest, Evidence};
use crate::lexicon::{verb_affinity, Measure, SynsetGraph};
use crate::text::{RequirementItem, RequirementsDocument, SectionKind, SentenceGraph};

use condition::condition_from_clause;
pub use condition::{
    extract_condition, extract_timing, unit_seconds, Comparator, ComparatorTable, Condition, ConditionSubject, TimingConstraint,
    BUNDLED_COMPARATORS,
};

pub const BUNDLED_SEEDS: &str = include_str!("../../data/seeds.txt");

/// Subordinators that open a situation clause.
pub const CONDITION_MARKERS: &[&str] = &["when", "if", "while", "whenever"];

/// Verbs that only carry obligation; the content verb is their complement.
const OBLIGATION_VERBS: &[&str] = &["need", "have"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("item `{0}` has no main verb")]
    NoMainVerb(String),
    #[error("no comparator phrase recognised in `{0}`")]
    UnrecognizedComparator(String),
    #[error("seed file line {line}: {reason}")]
    MalformedSeeds { line: usize, reason: String },
    #[error("comparator file line {line}: {reason}")]
    MalformedComparators { line: usize, reason: String },
    #[error("type override `{choice}` for `{target}` is not an invariant type")]
    BadOverride { target: String, choice: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InvariantType {
    Abstract,
    Process,
    Exchange,
    Assumption,
}

impl fmt::Display for InvariantType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InvariantType::Abstract => "Abstract",
            InvariantType::Process => "Process",
            InvariantType::Exchange => "Exchange",
            InvariantType::Assumption => "Assumption",
        })
    }
}

impl FromStr for InvariantType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abstract" => Ok(InvariantType::Abstract),
            "process" => Ok(InvariantType::Process),
            "exchange" => Ok(InvariantType::Exchange),
            "assumption" => Ok(InvariantType::Assumption),
            other => Err(format!("unknown invariant type `{other}`")),
        }
    }
}

/// Seed verbs per competing type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSets {
    pub exchange: BTreeSet<String>,
    pub process: BTreeSet<String>,
}

impl Default for SeedSets {
    fn default() -> Self {
        SeedSets::parse(BUNDLED_SEEDS).expect("bundled seed file is well-formed")
    }
}

impl SeedSets {
    /// Reads `exchange: a, b` / `process: c, d` lines.
    pub fn parse(text: &str) -> Result<Self, ClassifyError> {
        let mut exchange = BTreeSet::new();
        let mut process = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| ClassifyError::MalformedSeeds { line: n + 1, reason: reason.into() };
            let (kind, list) = line.split_once(':').ok_or_else(|| bad("expected `<type>: lemma, ...`"))?;
            let lemmas = list.split(',').map(|l| l.trim().to_lowercase()).filter(|l| !l.is_empty());
            match kind.trim() {
                "exchange" => exchange.extend(lemmas),
                "process" => process.extend(lemmas),
                other => return Err(bad(&format!("unknown seed type `{other}`"))),
            }
        }
        if exchange.is_empty() || process.is_empty() {
            return Err(ClassifyError::MalformedSeeds { line: 0, reason: "both seed sets must be non-empty".into() });
        }
        Ok(SeedSets { exchange, process })
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyConfig {
    pub lexicon: SynsetGraph,
    pub seeds: SeedSets,
    pub measure: Measure,
    pub comparators: ComparatorTable,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            lexicon: SynsetGraph::bundled(),
            seeds: SeedSets::default(),
            measure: Measure::Wup,
            comparators: ComparatorTable::default(),
        }
    }
}

/// Tokens of one sentence that belong to a requirement (a whole sentence,
/// or one side of a conditional split).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseRef {
    pub sentence_id: String,
    pub tokens: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedRequirement {
    /// The item id, or `<item>/when` for the assumption split off an item.
    pub id: String,
    pub item_id: String,
    pub section: SectionKind,
    pub sentences: Vec<String>,
    pub clauses: Vec<ClauseRef>,
    /// `None` when no main verb could be found.
    pub invariant_type: Option<InvariantType>,
    pub confidence: f64,
    pub main_verb_lemma: Option<String>,
    /// `(exchange, process)` affinities when the verb decided the type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affinity: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingConstraint>,
    pub children: Vec<String>,
    pub parent: Option<String>,
    /// Why a designer should look at this record, if at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub overridden: bool,
}

impl ClassifiedRequirement {
    /// Id of the assumption split off item `item`.
    pub fn assumption_id(item: &str) -> String {
        format!("{item}/when")
    }

    pub fn is_assumption(&self) -> bool {
        self.invariant_type == Some(InvariantType::Assumption)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub requirements: Vec<ClassifiedRequirement>,
    pub requests: Vec<DecisionRequest>,
}

/// Follows obligation verbs ("needs to", "has to") down to the content verb.
pub fn main_verb(g: &SentenceGraph) -> Option<usize> {
    let mut v = g.root()?;
    loop {
        let t = g.token(v)?;
        if OBLIGATION_VERBS.contains(&t.lemma.as_str()) {
            if let Some(x) = g.child_with(v, "xcomp") {
                v = x;
                continue;
            }
        }
        break;
    }
    let t = g.token(v)?;
    if t.is_verb() {
        Some(v)
    } else {
        // Predicate adjective or noun: the copula stands in.
        g.child_with(v, "cop")
    }
}

/// The conditional clause of a sentence: the adverbial clause introduced
/// by a situation marker, without the marker itself. Without such a clause
/// in the parse, the words from a leading marker up to the first comma.
pub fn conditional_clause(g: &SentenceGraph) -> Option<(usize, BTreeSet<usize>)> {
    advcl_clause(g).or_else(|| comma_clause(g))
}

fn comma_clause(g: &SentenceGraph) -> Option<(usize, BTreeSet<usize>)> {
    let marker = g.tokens.iter().find(|t| CONDITION_MARKERS.contains(&t.lemma.as_str()))?;
    let toks: BTreeSet<usize> = g.tokens[marker.index..].iter().take_while(|t| t.pos != "," && t.pos != ".").map(|t| t.index).collect();
    (!toks.is_empty()).then_some((marker.index, toks))
}

fn advcl_clause(g: &SentenceGraph) -> Option<(usize, BTreeSet<usize>)> {
    for e in g.edges.iter().filter(|e| e.relation == "advcl") {
        let mark = g
            .children(e.dependent)
            .find(|m| m.relation == "mark" && g.token(m.dependent).is_some_and(|t| CONDITION_MARKERS.contains(&t.lemma.as_str())));
        if let Some(mark) = mark {
            let mut toks: BTreeSet<usize> = g.subtree(e.dependent).into_iter().collect();
            toks.remove(&mark.dependent);
            // Trailing punctuation belongs to the main clause.
            while let Some(&last) = toks.iter().next_back() {
                if g.token(last).is_some_and(|t| t.pos == "," || t.pos == ".") {
                    toks.remove(&last);
                } else {
                    break;
                }
            }
            return Some((e.dependent, toks));
        }
    }
    None
}

fn all_tokens(g: &SentenceGraph) -> BTreeSet<usize> {
    g.tokens.iter().map(|t| t.index).collect()
}

/// Types a single item, returning one record (two for a conditional split).
pub fn classify(
    item: &RequirementItem,
    doc: &RequirementsDocument,
    catalog: &ComponentCatalog,
    config: &ClassifyConfig,
) -> Vec<ClassifiedRequirement> {
    let graphs: Vec<&SentenceGraph> = item.sentences.iter().filter_map(|s| doc.graphs.get(s)).collect();
    let base = ClassifiedRequirement {
        id: item.item_id.clone(),
        item_id: item.item_id.clone(),
        section: item.section,
        sentences: item.sentences.clone(),
        clauses: graphs.iter().map(|g| ClauseRef { sentence_id: g.sentence_id.clone(), tokens: all_tokens(g) }).collect(),
        invariant_type: None,
        confidence: 0.0,
        main_verb_lemma: None,
        affinity: None,
        condition: None,
        timing: None,
        children: item.children.clone(),
        parent: item.parent.clone(),
        review: None,
        overridden: false,
    };
    let verb = graphs.first().and_then(|g| main_verb(g).and_then(|v| g.token(v)).map(|t| t.lemma.clone()));

    if !item.children.is_empty() {
        return vec![ClassifiedRequirement {
            invariant_type: Some(InvariantType::Abstract),
            confidence: 1.0,
            main_verb_lemma: verb,
            ..base
        }];
    }

    if item.section == SectionKind::SituationSpecific {
        let split = graphs.iter().find_map(|g| conditional_clause(g).map(|c| (*g, c)));
        if let Some((g, (_, cond_tokens))) = split {
            let condition = condition_from_clause(g, &cond_tokens, &doc.source, catalog, &config.comparators);
            let review = condition.comparator.is_none().then(|| "unrecognized comparator".to_string());
            let assumption = ClassifiedRequirement {
                id: ClassifiedRequirement::assumption_id(&item.item_id),
                sentences: vec![g.sentence_id.clone()],
                clauses: vec![ClauseRef { sentence_id: g.sentence_id.clone(), tokens: cond_tokens.clone() }],
                invariant_type: Some(InvariantType::Assumption),
                confidence: 1.0,
                main_verb_lemma: Some("be".into()),
                condition: Some(condition),
                children: Vec::new(),
                review,
                ..base.clone()
            };
            let mut main = base;
            for c in main.clauses.iter_mut().filter(|c| c.sentence_id == g.sentence_id) {
                c.tokens.retain(|t| !cond_tokens.contains(t));
                // The marker goes with the condition, not the action.
                c.tokens.retain(|&t| !g.token(t).is_some_and(|tok| CONDITION_MARKERS.contains(&tok.lemma.as_str())));
            }
            type_by_verb(&mut main, &graphs, config);
            return vec![assumption, main];
        }
    }

    let mut req = base;
    type_by_verb(&mut req, &graphs, config);
    vec![req]
}

fn type_by_verb(req: &mut ClassifiedRequirement, graphs: &[&SentenceGraph], config: &ClassifyConfig) {
    req.timing = graphs.iter().find_map(|g| extract_timing(g));
    let Some(lemma) = graphs.first().and_then(|g| main_verb(g).and_then(|v| g.token(v)).map(|t| t.lemma.clone())) else {
        req.review = Some("no main verb".into());
        return;
    };
    let e = verb_affinity(&lemma, &config.seeds.exchange, &config.lexicon, config.measure).value;
    let p = verb_affinity(&lemma, &config.seeds.process, &config.lexicon, config.measure).value;
    req.main_verb_lemma = Some(lemma);
    req.affinity = Some((round4(e), round4(p)));
    let max = e.max(p);
    if e > p {
        req.invariant_type = Some(InvariantType::Exchange);
        req.confidence = round4((e - p) / max);
    } else if p > e {
        req.invariant_type = Some(InvariantType::Process);
        req.confidence = round4((p - e) / max);
    } else {
        req.invariant_type = Some(InvariantType::Process);
        req.confidence = 0.0;
        req.review = Some("verb affinity tie".into());
    }
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Classifies every requirement item, applies journal type overrides and
/// lists the records a designer should confirm. Type questions never block:
/// a tie defaults to Process, and only a missing main verb leaves the type
/// open.
pub fn classify_all(
    doc: &RequirementsDocument,
    catalog: &ComponentCatalog,
    config: &ClassifyConfig,
    journal: &DecisionJournal,
) -> Result<Classification, ClassifyError> {
    let mut requirements = Vec::new();
    let mut requests = Vec::new();
    for item in &doc.requirement_items {
        for mut req in classify(item, doc, catalog, config) {
            if let Some(choice) = journal.choice(DecisionKind::TypeOverride, &req.id) {
                let ty: InvariantType =
                    choice.parse().map_err(|_| ClassifyError::BadOverride { target: req.id.clone(), choice: choice.to_string() })?;
                req.invariant_type = Some(ty);
                req.overridden = true;
                req.review = None;
            } else if let Some(reason) = &req.review {
                let suggested = req.invariant_type.map(|t| t.to_string()).unwrap_or_else(|| "Process".into());
                let mut r = DecisionRequest::new(DecisionKind::TypeOverride, &req.id, suggested).options([
                    "Process",
                    "Exchange",
                    "Abstract",
                    "Assumption",
                ]);
                r.blocking = req.invariant_type.is_none();
                r.evidence.push(Evidence::new("classification").note(reason.clone()));
                if let Some((e, p)) = req.affinity {
                    r.evidence.push(Evidence::new("exchange_affinity").score(e));
                    r.evidence.push(Evidence::new("process_affinity").score(p));
                }
                excerpt(doc, &mut r, &req.sentences);
                requests.push(r);
            }
            debug_assert!(!req.is_assumption() || req.section == SectionKind::SituationSpecific);
            requirements.push(req);
        }
    }
    Ok(Classification { requirements, requests })
}

pub(crate) fn excerpt(doc: &RequirementsDocument, req: &mut DecisionRequest, sentences: &[String]) {
    let texts: Vec<&str> = sentences.iter().filter_map(|s| doc.sentence(s)).map(|s| s.text.as_str()).collect();
    req.excerpt = texts.join(" ");
    req.spans.extend(sentences.iter().filter_map(|s| doc.sentence(s)).map(|s| s.span));
}

/// Types by id, for quick lookups in tests and reports.
pub fn type_table(reqs: &[ClassifiedRequirement]) -> BTreeMap<String, Option<InvariantType>> {
    reqs.iter().map(|r| (r.id.clone(), r.invariant_type)).collect()
}
