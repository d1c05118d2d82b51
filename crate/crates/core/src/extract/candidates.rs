//! Noun-phrase candidates from grammatical roles, and the kind-hint rules.

use std::collections::{BTreeMap, BTreeSet};

use crate::text::{RequirementsDocument, SentenceGraph};

use super::{EntityCandidate, KindHint, Mention};

/// Relations whose dependent is a candidate noun phrase.
pub const CANDIDATE_ROLES: &[&str] = &["nsubj", "nsubjpass", "dobj", "iobj", "pobj", "appos"];

/// Adjectives that describe a mention rather than name the entity; they are
/// left out of the phrase ("the existing plan" is the plan).
pub const NON_RESTRICTIVE: &[&str] =
    &["different", "same", "main", "existing", "appropriate", "adequate", "each", "other", "new", "current", "up-to-date"];

const DETERMINERS: &[&str] = &["every", "the", "its", "a", "an", "their", "this", "these", "those", "each"];
const OBLIGATION_MODALS: &[&str] = &["should", "must", "shall"];
const OBLIGATION_VERBS: &[&str] = &["need", "have"];
const ATTRIBUTE_VERBS: &[&str] = &["monitor", "assess", "update", "exchange"];
const POSSESSIVES: &[&str] = &["its", "their", "his", "her"];
const EXEMPLIFIERS: &[&str] = &["e.g.", "e.g", "eg."];

/// Lowercases, drops leading determiners, and singularizes the final word.
/// Hyphens are kept for display; see [`match_key`].
pub fn normalize_phrase(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let mut words: Vec<&str> = lower.split_whitespace().collect();
    while words.len() > 1 && DETERMINERS.contains(&words[0]) {
        words.remove(0);
    }
    if let Some(last) = words.pop() {
        let single = singularize(last);
        let mut out: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        out.push(single);
        out.join(" ")
    } else {
        String::new()
    }
}

/// The string compared by the alias metrics: no hyphens, no case.
pub fn match_key(phrase: &str) -> String {
    phrase.to_lowercase().replace('-', "")
}

pub fn singularize(word: &str) -> String {
    const KEEP: &[&str] = &["status", "bus", "gas", "class", "process", "access", "news", "analysis", "series"];
    if KEEP.contains(&word) || word.len() <= 3 {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    word.strip_suffix('s').unwrap_or(word).to_string()
}

/// Token indices inside "(e.g., …)" asides. Examples illustrate a
/// requirement rather than state one, so they contribute no candidates.
pub fn exemplified_tokens(g: &SentenceGraph) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut open: Option<usize> = None;
    for t in &g.tokens {
        match t.surface.as_str() {
            "(" => {
                let next = g.token(t.index + 1).map(|n| n.surface.to_lowercase());
                if next.as_deref().is_some_and(|n| EXEMPLIFIERS.contains(&n)) {
                    open = Some(t.index);
                }
            }
            ")" if open.is_some() => {
                out.extend(open.take().unwrap()..=t.index);
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        out.extend(start..=g.tokens.len());
    }
    out
}

/// The tokens forming the noun phrase headed by `head`: left compound and
/// (restrictive) adjective modifiers, plus a right "of + bare singular noun"
/// ("place of interest"). Returns the sorted token indices and the index of
/// an absorbed `of`-object, if any.
pub fn phrase_tokens(g: &SentenceGraph, head: usize) -> (Vec<usize>, Option<usize>) {
    let mut toks = BTreeSet::from([head]);
    collect_left_mods(g, head, &mut toks);
    let mut absorbed = None;
    if let Some(of) = g.children(head).find(|e| e.relation == "prep" && lemma(g, e.dependent) == "of").map(|e| e.dependent) {
        if of > head {
            if let Some(obj) = g.child_with(of, "pobj") {
                let t = g.token(obj).expect("edge endpoints exist");
                let bare = !g.children(obj).any(|e| matches!(e.relation.as_str(), "det" | "poss" | "num" | "prep"));
                if t.pos == "NN" && bare {
                    toks.insert(of);
                    toks.insert(obj);
                    collect_left_mods(g, obj, &mut toks);
                    absorbed = Some(obj);
                }
            }
        }
    }
    (toks.into_iter().collect(), absorbed)
}

fn collect_left_mods(g: &SentenceGraph, head: usize, toks: &mut BTreeSet<usize>) {
    // Walk leftwards over contiguous modifiers; a skipped adjective stops the
    // phrase so that "available parking slot" and "the same time" behave.
    let mods: BTreeMap<usize, &str> = g
        .children(head)
        .filter(|e| e.dependent < head && matches!(e.relation.as_str(), "compound" | "amod"))
        .map(|e| (e.dependent, e.relation.as_str()))
        .collect();
    let mut k = head;
    while k > 1 {
        let prev = k - 1;
        match mods.get(&prev) {
            Some(&"compound") => {}
            Some(_) => {
                let t = g.token(prev).expect("edge endpoints exist");
                if NON_RESTRICTIVE.contains(&t.lemma.as_str())
                    || !t.pos.starts_with("JJ") && !t.pos.starts_with("NN") && !t.pos.starts_with("VB")
                {
                    break;
                }
            }
            None => break,
        }
        toks.insert(prev);
        k = prev;
    }
}

fn lemma(g: &SentenceGraph, i: usize) -> &str {
    g.token(i).map(|t| t.lemma.as_str()).unwrap_or("")
}

/// Phrase text for token indices: modifiers by surface, the head by lemma.
fn phrase_text(g: &SentenceGraph, toks: &[usize], head: usize) -> String {
    let words: Vec<String> = toks
        .iter()
        .map(|&i| {
            let t = g.token(i).expect("phrase tokens exist");
            if i == head {
                t.lemma.clone()
            } else {
                t.surface.to_lowercase()
            }
        })
        .collect();
    normalize_phrase(&words.join(" "))
}

/// Normalized phrase of the noun phrase headed by token `head`.
pub fn phrase_at(g: &SentenceGraph, head: usize) -> String {
    let (toks, _) = phrase_tokens(g, head);
    phrase_text(g, &toks, head)
}

/// A role-filling noun found in one sentence, before grouping.
#[derive(Debug, Clone)]
struct Occurrence {
    phrase: String,
    head_lemma: String,
    surfaces: Vec<String>,
    mention: Mention,
    order: (usize, usize),
}

/// One candidate per distinct normalized phrase filling a subject/object
/// role. Parenthesized appositives are separate candidates with role
/// `appos`. Sentences without graphs contribute nothing.
pub fn extract_candidates(doc: &RequirementsDocument) -> Vec<EntityCandidate> {
    let mut seen_spans = BTreeSet::new();
    let mut occurrences = Vec::new();
    for (order, s) in doc.sentences.iter().enumerate() {
        let Some(g) = doc.graphs.get(&s.id) else { continue };
        let skip = exemplified_tokens(g);
        let absorbed: BTreeSet<usize> = g.tokens.iter().filter(|t| t.is_noun()).filter_map(|t| phrase_tokens(g, t.index).1).collect();
        for e in &g.edges {
            if !CANDIDATE_ROLES.contains(&e.relation.as_str()) || skip.contains(&e.dependent) || absorbed.contains(&e.dependent) {
                continue;
            }
            let head = g.token(e.dependent).expect("edge endpoints exist");
            if !head.is_noun() {
                continue;
            }
            let (toks, _) = phrase_tokens(g, e.dependent);
            let phrase = phrase_text(g, &toks, e.dependent);
            if phrase.is_empty() {
                continue;
            }
            let first = g.token(toks[0]).expect("phrase tokens exist");
            let last = g.token(*toks.last().unwrap()).expect("phrase tokens exist");
            let span = (first.char_span.0, last.char_span.1);
            if !seen_spans.insert(span) {
                continue;
            }
            occurrences.push(Occurrence {
                phrase,
                head_lemma: head.lemma.clone(),
                surfaces: toks.iter().map(|&i| g.token(i).unwrap().surface.clone()).collect(),
                mention: Mention {
                    sentence_id: s.id.clone(),
                    tokens: (toks[0], *toks.last().unwrap()),
                    head: e.dependent,
                    role: e.relation.clone(),
                    span,
                    hint: KindHint::Unknown,
                    owner: None,
                },
                order: (order, e.dependent),
            });
        }
    }
    occurrences.sort_by_key(|o| o.order);

    let mut out: Vec<EntityCandidate> = Vec::new();
    for occ in occurrences {
        match out.iter_mut().find(|c| c.phrase == occ.phrase) {
            Some(c) => {
                c.mentions.push(occ.mention);
                merge_surface(&mut c.label, &occ.surfaces);
            }
            None => out.push(EntityCandidate {
                label: display_label(&occ.phrase, &occ.surfaces),
                phrase: occ.phrase,
                head_lemma: occ.head_lemma,
                mentions: vec![occ.mention],
                kind_hint: KindHint::Unknown,
            }),
        }
    }
    out
}

/// Keeps acronyms upper-case ("POI"); everything else is the phrase itself.
fn display_label(phrase: &str, surfaces: &[String]) -> String {
    let mut label = phrase.to_string();
    merge_surface(&mut label, surfaces);
    label
}

fn merge_surface(label: &mut String, surfaces: &[String]) {
    let acronyms: BTreeSet<String> =
        surfaces.iter().filter(|s| s.len() > 1 && s.chars().all(|c| c.is_ascii_uppercase())).map(|s| s.to_lowercase()).collect();
    if acronyms.is_empty() {
        return;
    }
    *label = label.split(' ').map(|w| if acronyms.contains(w) { w.to_uppercase() } else { w.to_string() }).collect::<Vec<_>>().join(" ");
}

/// Whether `verb` carries an obligation: a modal auxiliary ("should") or a
/// need/have + to construction ("needs to", "has to").
fn is_obligation(g: &SentenceGraph, verb: usize) -> bool {
    let modal = g.children(verb).any(|e| e.relation == "aux" && OBLIGATION_MODALS.contains(&lemma(g, e.dependent)));
    let need_to = OBLIGATION_VERBS.contains(&lemma(g, verb)) && g.token(verb + 1).is_some_and(|t| t.lemma == "to");
    modal || need_to
}

/// Resolves a possessive or pronoun at `at` to the nearest preceding nominal
/// subject in the same sentence.
fn antecedent(g: &SentenceGraph, at: usize) -> Option<usize> {
    g.edges
        .iter()
        .filter(|e| e.relation == "nsubj" && e.dependent < at)
        .filter(|e| g.token(e.dependent).is_some_and(|t| t.is_noun()))
        .map(|e| e.dependent)
        .max()
}

/// Assigns kind hints by rules applied in order to every mention: the
/// subject of an obligation is a component; a phrase possessed ("its",
/// "their") by a component is an attribute owned by it; the object of
/// monitor/assess/update/exchange is an attribute; anything else is
/// unknown.
///
/// A candidate is a component if any mention is, else an attribute if any
/// mention is.
pub fn hint_kinds(mut cands: Vec<EntityCandidate>, doc: &RequirementsDocument) -> Vec<EntityCandidate> {
    let mut components = BTreeSet::new();
    for c in cands.iter_mut() {
        for m in c.mentions.iter_mut() {
            let Some(g) = doc.graphs.get(&m.sentence_id) else { continue };
            if m.role == "nsubj" && g.head_of(m.head).is_some_and(|e| is_obligation(g, e.head)) {
                m.hint = KindHint::Component;
                components.insert(c.phrase.clone());
            }
        }
    }

    for c in cands.iter_mut() {
        for m in c.mentions.iter_mut() {
            if m.hint != KindHint::Unknown {
                continue;
            }
            let Some(g) = doc.graphs.get(&m.sentence_id) else { continue };
            let possessor = g
                .children(m.head)
                .find(|e| e.relation == "poss" && POSSESSIVES.contains(&lemma(g, e.dependent)))
                .and_then(|e| antecedent(g, e.dependent))
                .map(|i| phrase_at(g, i));
            if let Some(owner) = possessor.filter(|p| components.contains(p)) {
                m.hint = KindHint::Attribute;
                m.owner = Some(owner);
                continue;
            }
            let governed = g.head_of(m.head).is_some_and(|e| e.relation == "dobj" && ATTRIBUTE_VERBS.contains(&lemma(g, e.head)));
            if governed {
                m.hint = KindHint::Attribute;
            }
        }
        c.kind_hint = if c.mentions.iter().any(|m| m.hint == KindHint::Component) {
            KindHint::Component
        } else if c.mentions.iter().any(|m| m.hint == KindHint::Attribute) {
            KindHint::Attribute
        } else {
            KindHint::Unknown
        };
    }
    cands
}

/// One pair per `appos` edge between nouns: (governing phrase, appositive).
pub fn detect_appositions(doc: &RequirementsDocument) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for s in &doc.sentences {
        let Some(g) = doc.graphs.get(&s.id) else { continue };
        for e in g.edges.iter().filter(|e| e.relation == "appos") {
            let (Some(h), Some(d)) = (g.token(e.head), g.token(e.dependent)) else { continue };
            if !h.is_noun() || !d.is_noun() {
                continue;
            }
            let (ht, _) = phrase_tokens(g, e.head);
            let (dt, _) = phrase_tokens(g, e.dependent);
            let pair = (phrase_text(g, &ht, e.head), phrase_text(g, &dt, e.dependent), s.id.clone());
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    out
}
