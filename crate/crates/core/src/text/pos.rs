//! Lexicon-driven POS tagger with a handful of contextual preferences.

use std::collections::HashMap;

use super::tokenize::RawToken;
use super::TextError;

pub const BUNDLED_POS_LEXICON: &str = include_str!("../../data/pos_lexicon.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
struct Reading {
    tag: String,
    lemma: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PosTagger {
    entries: HashMap<String, Vec<Reading>>,
}

impl PosTagger {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_POS_LEXICON).expect("bundled POS lexicon is well-formed")
    }

    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-empty line").to_lowercase();
            let readings: Vec<Reading> = fields
                .map(|f| match f.split_once('=') {
                    Some((tag, lemma)) => Reading { tag: tag.to_string(), lemma: Some(lemma.to_string()) },
                    None => Reading { tag: f.to_string(), lemma: None },
                })
                .collect();
            if readings.is_empty() {
                return Err(TextError::MalformedLexicon { line: idx + 1, reason: format!("`{word}` has no tags") });
            }
            entries.insert(word, readings);
        }
        Ok(PosTagger { entries })
    }

    pub fn knows(&self, word: &str) -> bool {
        self.entries.contains_key(&word.to_lowercase())
    }

    /// Returns `(tag, lemma)` per token.
    pub fn tag(&self, tokens: &[RawToken]) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            let lower = tok.surface.to_lowercase();
            let readings = self.readings(&tok.surface, i == 0);
            let prev = out.last().map(|(t, _)| t.as_str());
            let prev2 = if i >= 2 { Some(out[i - 2].0.as_str()) } else { None };
            let next = tokens.get(i + 1).map(|t| t.surface.to_lowercase());
            let chosen = choose(&readings, prev, prev2, next.as_deref(), i == 0);
            let lemma = chosen.lemma.clone().unwrap_or_else(|| self.lemmatize(&lower, &chosen.tag));
            out.push((chosen.tag.clone(), lemma));
        }
        out
    }

    fn readings(&self, surface: &str, initial: bool) -> Vec<Reading> {
        let lower = surface.to_lowercase();
        if let Some(r) = self.entries.get(&lower) {
            return r.clone();
        }
        vec![Reading { tag: guess_tag(surface, initial).to_string(), lemma: None }]
    }

    fn lemmatize(&self, lower: &str, tag: &str) -> String {
        let known_verb = |w: &str| self.entries.get(w).is_some_and(|rs| rs.iter().any(|r| r.tag == "VB" || r.tag == "VBP"));
        match tag {
            "NNS" | "NNPS" => singularize(lower),
            "VBZ" => {
                let stem = lower.strip_suffix("es").filter(|s| known_verb(s));
                stem.or_else(|| lower.strip_suffix('s')).unwrap_or(lower).to_string()
            }
            "VBD" | "VBN" => strip_verb_suffix(lower, "ed", known_verb),
            "VBG" => strip_verb_suffix(lower, "ing", known_verb),
            _ => lower.to_string(),
        }
    }
}

fn strip_verb_suffix(word: &str, suffix: &str, known: impl Fn(&str) -> bool) -> String {
    let Some(stem) = word.strip_suffix(suffix) else {
        return word.to_string();
    };
    let with_e = format!("{stem}e");
    if known(stem) {
        stem.to_string()
    } else if known(&with_e) {
        with_e
    } else {
        stem.to_string()
    }
}

/// Rule-based singular form: `-ies` -> `-y`, sibilant `-es` and plain `-s`
/// are stripped.
pub fn singularize(word: &str) -> String {
    if word.len() <= 3 || word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for sib in ["sses", "xes", "ches", "shes", "zes"] {
        if word.ends_with(sib) {
            return word[..word.len() - 2].to_string();
        }
    }
    word.strip_suffix('s').unwrap_or(word).to_string()
}

fn guess_tag(surface: &str, initial: bool) -> &'static str {
    let lower = surface.to_lowercase();
    match surface {
        "(" => return "-LRB-",
        ")" => return "-RRB-",
        "," => return ",",
        "." | "!" | "?" => return ".",
        ";" | ":" | "-" => return ":",
        "\"" | "'" => return "''",
        _ => {}
    }
    if surface.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
        return "CD";
    }
    if !surface.chars().any(char::is_alphanumeric) {
        return "SYM";
    }
    if lower.ends_with('.') {
        return "FW";
    }
    let capitalized = surface.chars().next().is_some_and(char::is_uppercase);
    if surface.len() > 1 && surface.chars().all(|c| c.is_uppercase() || c.is_ascii_digit()) {
        return "NNP";
    }
    if capitalized {
        return if initial { "NN" } else { "NNP" };
    }
    if lower.ends_with("ly") {
        "RB"
    } else if lower.ends_with("ing") {
        "VBG"
    } else if lower.ends_with("ed") {
        "VBN"
    } else if lower.ends_with('s') && !lower.ends_with("ss") && !lower.ends_with("us") {
        "NNS"
    } else {
        "NN"
    }
}

fn choose<'a>(readings: &'a [Reading], prev: Option<&str>, prev2: Option<&str>, next: Option<&str>, initial: bool) -> &'a Reading {
    if readings.len() == 1 {
        return &readings[0];
    }
    let find = |pred: &dyn Fn(&str) -> bool| readings.iter().find(|r| pred(&r.tag));
    let after_infinitive = matches!(prev, Some("TO" | "MD")) || (prev == Some("RB") && matches!(prev2, Some("TO" | "MD")));
    if after_infinitive || initial {
        if let Some(r) = find(&|t| t == "VB") {
            return r;
        }
    }
    if matches!(prev, Some("DT" | "PRP$" | "JJ" | "JJR" | "JJS" | "CD" | "NN" | "NNP")) {
        if next == Some("to") {
            if let Some(r) = find(&|t| t == "VBZ" || t == "VBP") {
                return r;
            }
        }
        if let Some(r) = find(&|t| t.starts_with("NN")) {
            return r;
        }
        if let Some(r) = find(&|t| t.starts_with("JJ")) {
            return r;
        }
    }
    &readings[0]
}
