//! Situation conditions ("more than 5km far from the POI") and timing
//! constraints ("at least once per 60 seconds").

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::extract::{phrase_at, AttrRef, CatalogEntity, ComponentCatalog};
use crate::text::SentenceGraph;

use super::{conditional_clause, ClassifyError};

pub const BUNDLED_COMPARATORS: &str = include_str!("../../data/comparators.txt");

/// Words that turn a condition into a distance between two positions.
const DISTANCE_WORDS: &[&str] = &["far", "close", "near", "distant"];
const DISTANCE_PREPS: &[&str] = &["from", "to"];
const POSITION: &str = "position";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
        }
    }

    pub fn parse(symbol: &str) -> Option<Self> {
        Some(match symbol {
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            "=" => Comparator::Eq,
            _ => return None,
        })
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => lhs == rhs,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Comparator phrases, longest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparatorTable {
    phrases: Vec<(Vec<String>, Comparator)>,
}

impl Default for ComparatorTable {
    fn default() -> Self {
        ComparatorTable::parse(BUNDLED_COMPARATORS).expect("bundled comparator table is well-formed")
    }
}

impl ComparatorTable {
    /// Reads `phrase<TAB>symbol` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ClassifyError> {
        let mut phrases = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| ClassifyError::MalformedComparators { line: n + 1, reason };
            let (phrase, symbol) = line.split_once('\t').ok_or_else(|| bad("expected `phrase<TAB>comparator`".into()))?;
            let cmp = Comparator::parse(symbol.trim()).ok_or_else(|| bad(format!("unknown comparator `{}`", symbol.trim())))?;
            let words: Vec<String> = phrase.split_whitespace().map(str::to_lowercase).collect();
            if words.is_empty() {
                return Err(bad("empty phrase".into()));
            }
            phrases.push((words, cmp));
        }
        // Stable sort keeps file order among equally long phrases.
        phrases.sort_by_key(|p| std::cmp::Reverse(p.0.len()));
        Ok(ComparatorTable { phrases })
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// The longest phrase occurring as a contiguous run of `words`; ties go
    /// to the earliest occurrence. Returns `(start, end exclusive, comparator)`.
    pub fn find(&self, words: &[&str]) -> Option<(usize, usize, Comparator)> {
        let mut best: Option<(usize, usize, Comparator)> = None;
        for (phrase, cmp) in &self.phrases {
            if best.is_some_and(|(s, e, _)| phrase.len() < e - s) {
                break;
            }
            let hit = words.windows(phrase.len()).position(|w| w.iter().zip(phrase).all(|(a, b)| a.eq_ignore_ascii_case(b)));
            if let Some(start) = hit {
                let better = best.is_none_or(|(s, _, _)| start < s);
                if better {
                    best = Some((start, start + phrase.len(), *cmp));
                }
            }
        }
        best
    }
}

/// What a condition measures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionSubject {
    Attribute(AttrRef),
    Distance {
        from: AttrRef,
        to: AttrRef,
    },
    /// A phrase the catalog does not know.
    Unresolved(String),
}

impl fmt::Display for ConditionSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionSubject::Attribute(a) => write!(f, "{a}"),
            ConditionSubject::Distance { from, to } => write!(f, "distance({from}, {to})"),
            ConditionSubject::Unresolved(p) => write!(f, "\"{p}\""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<ConditionSubject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<Comparator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl Condition {
    /// `distance(E-Car::position, E-Car::POI) > 5 km`, or the raw text when
    /// the condition could not be structured.
    pub fn formula(&self) -> String {
        match (&self.subject, self.comparator, self.value) {
            (Some(s), Some(c), Some(v)) => {
                let unit = self.unit.as_deref().map(|u| format!(" {u}")).unwrap_or_default();
                format!("{s} {c} {}{unit}", fmt_number(v))
            }
            _ => self.raw_text.clone(),
        }
    }

    /// Attributes the condition reads.
    pub fn inputs(&self) -> Vec<AttrRef> {
        match &self.subject {
            Some(ConditionSubject::Attribute(a)) => vec![a.clone()],
            Some(ConditionSubject::Distance { from, to }) => {
                let mut v = vec![from.clone()];
                if to != from {
                    v.push(to.clone());
                }
                v
            }
            _ => Vec::new(),
        }
    }
}

fn fmt_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Structures the conditional clause of `g`, if it has one.
pub fn extract_condition(g: &SentenceGraph, source: &str, catalog: &ComponentCatalog, table: &ComparatorTable) -> Option<Condition> {
    let (_, tokens) = conditional_clause(g)?;
    Some(condition_from_clause(g, &tokens, source, catalog, table))
}

pub(crate) fn condition_from_clause(
    g: &SentenceGraph,
    tokens: &BTreeSet<usize>,
    source: &str,
    catalog: &ComponentCatalog,
    table: &ComparatorTable,
) -> Condition {
    let idx: Vec<usize> = tokens.iter().copied().collect();
    let raw_text = match (idx.first().and_then(|&i| g.token(i)), idx.last().and_then(|&i| g.token(i))) {
        (Some(a), Some(b)) => source
            .get(a.char_span.0..b.char_span.1)
            .map(str::to_string)
            .unwrap_or_else(|| idx.iter().filter_map(|&i| g.token(i)).map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")),
        _ => String::new(),
    };
    let words: Vec<&str> = idx.iter().filter_map(|&i| g.token(i)).map(|t| t.surface.as_str()).collect();

    let mut cond = Condition { raw_text, subject: None, comparator: None, value: None, unit: None };
    if let Some((_, end, cmp)) = table.find(&words) {
        cond.comparator = Some(cmp);
        let after = &idx[end..];
        if let Some(pos) = after.iter().position(|&i| g.token(i).is_some_and(|t| t.pos == "CD")) {
            cond.value = g.token(after[pos]).and_then(|t| t.surface.replace(',', "").parse().ok());
            cond.unit =
                after.get(pos + 1).and_then(|&i| g.token(i)).filter(|t| t.is_noun() || t.surface == "%").map(|t| t.surface.to_lowercase());
        }
    }
    cond.subject = condition_subject(g, &idx, catalog);
    cond
}

fn condition_subject(g: &SentenceGraph, idx: &[usize], catalog: &ComponentCatalog) -> Option<ConditionSubject> {
    let inside = |i: usize| idx.contains(&i);
    let subj = idx.iter().find_map(|&i| g.children(i).find(|e| e.relation == "nsubj" && inside(e.dependent)).map(|e| e.dependent))?;
    let subj_phrase = phrase_at(g, subj);
    let subj_entity = catalog.resolve(&subj_phrase);

    // "far from X", "close to X"
    for &i in idx {
        let Some(t) = g.token(i) else { continue };
        if !DISTANCE_WORDS.contains(&t.lemma.as_str()) {
            continue;
        }
        let prep = g
            .children(i)
            .find(|e| e.relation == "prep" && g.token(e.dependent).is_some_and(|p| DISTANCE_PREPS.contains(&p.lemma.as_str())));
        let Some(object) = prep.and_then(|p| g.child_with(p.dependent, "pobj")) else { continue };
        let from = match &subj_entity {
            Some(CatalogEntity::Component(c)) => AttrRef::new(c.clone(), POSITION),
            Some(CatalogEntity::Attribute { component, key }) => AttrRef::new(component.clone(), key.clone()),
            None => return Some(ConditionSubject::Unresolved(subj_phrase)),
        };
        let object_phrase = phrase_at(g, object);
        let to = match catalog.resolve(&object_phrase) {
            Some(CatalogEntity::Attribute { component, key }) => AttrRef::new(component, key),
            Some(CatalogEntity::Component(c)) => AttrRef::new(c, POSITION),
            None => return Some(ConditionSubject::Unresolved(object_phrase)),
        };
        return Some(ConditionSubject::Distance { from, to });
    }

    Some(match subj_entity {
        Some(CatalogEntity::Attribute { component, key }) => ConditionSubject::Attribute(AttrRef::new(component, key)),
        _ => ConditionSubject::Unresolved(subj_phrase),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingConstraint {
    /// Longest allowed gap between two executions.
    pub period_seconds: f64,
    pub raw_text: String,
}

const TIMING_PATTERNS: &[&[&str]] = &[&["at", "least", "once", "per"], &["at", "least", "once", "every"], &["at", "least", "every"]];

/// Seconds per unit word.
pub fn unit_seconds(unit: &str) -> Option<f64> {
    Some(match unit.to_lowercase().as_str() {
        "ms" | "millisecond" | "milliseconds" => 0.001,
        "s" | "sec" | "secs" | "second" | "seconds" => 1.0,
        "min" | "mins" | "minute" | "minutes" => 60.0,
        "h" | "hr" | "hrs" | "hour" | "hours" => 3600.0,
        "day" | "days" => 86_400.0,
        _ => return None,
    })
}

/// "at least once per N <unit>" / "at least every N <unit>". A bare unit
/// ("at least once per second") counts as one.
pub fn extract_timing(g: &SentenceGraph) -> Option<TimingConstraint> {
    let words: Vec<String> = g.tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    for pattern in TIMING_PATTERNS {
        let Some(start) = words.windows(pattern.len()).position(|w| w.iter().zip(pattern.iter()).all(|(a, b)| a == b)) else {
            continue;
        };
        let mut k = start + pattern.len();
        let mut n = 1.0;
        if let Some(v) = g.tokens.get(k).filter(|t| t.pos == "CD").and_then(|t| t.surface.parse::<f64>().ok()) {
            n = v;
            k += 1;
        }
        let Some(unit) = g.tokens.get(k) else { continue };
        let Some(secs) = unit_seconds(&unit.surface) else { continue };
        let raw_text = g.tokens[start..=k].iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ");
        return Some(TimingConstraint { period_seconds: n * secs, raw_text });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::shallow_parse;

    #[test]
    fn longest_phrase_wins() {
        let t = ComparatorTable::default();
        let words = ["is", "equal", "to", "or", "less", "than", "5", "km"];
        assert_eq!(t.find(&words), Some((1, 6, Comparator::Le)));
        assert_eq!(t.find(&["at", "least", "3"]), Some((0, 2, Comparator::Ge)));
        assert_eq!(t.find(&["is", "at", "0", "%"]), Some((1, 2, Comparator::Eq)));
        assert_eq!(t.find(&["is", "low"]), None);
    }

    #[test]
    fn table_rejects_bad_lines() {
        assert!(ComparatorTable::parse("more than\t>>\n").is_err());
        assert!(ComparatorTable::parse("more than >\n").is_err());
    }

    #[test]
    fn timing_units() {
        let g = shallow_parse("It should update its plan at least once per 60 seconds.").unwrap();
        assert_eq!(extract_timing(&g).unwrap().period_seconds, 60.0);
        let g = shallow_parse("It should update its plan at least every 10 seconds.").unwrap();
        assert_eq!(extract_timing(&g).unwrap().period_seconds, 10.0);
        let g = shallow_parse("It should update its plan at least every 2 minutes.").unwrap();
        assert_eq!(extract_timing(&g).unwrap().period_seconds, 120.0);
        let g = shallow_parse("It should update its plan.").unwrap();
        assert!(extract_timing(&g).is_none());
    }

    #[test]
    fn formula_text() {
        let c = Condition {
            raw_text: "x".into(),
            subject: Some(ConditionSubject::Distance { from: AttrRef::new("E-Car", "position"), to: AttrRef::new("E-Car", "POI") }),
            comparator: Some(Comparator::Gt),
            value: Some(5.0),
            unit: Some("km".into()),
        };
        assert_eq!(c.formula(), "distance(E-Car::position, E-Car::POI) > 5 km");
        assert_eq!(c.inputs().len(), 2);
    }
}
