//! The append-only decision journal and the requests that feed it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FlowError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    AliasMerge,
    Owner,
    Direction,
    TypeOverride,
    Composition,
}

impl DecisionKind {
    pub const ALL: [DecisionKind; 5] =
        [DecisionKind::AliasMerge, DecisionKind::Owner, DecisionKind::Direction, DecisionKind::TypeOverride, DecisionKind::Composition];

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionKind::AliasMerge => "alias_merge",
            DecisionKind::Owner => "owner",
            DecisionKind::Direction => "direction",
            DecisionKind::TypeOverride => "type_override",
            DecisionKind::Composition => "composition",
        }
    }
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecisionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DecisionKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown decision kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub decision_id: String,
    pub kind: DecisionKind,
    pub target: String,
    pub choice: String,
    pub author: String,
    pub timestamp: String,
}

/// Something the pipeline could not settle on its own.
///
/// `id` is `<kind>/<target>` and is what a journal entry answers; a request
/// is resolved once the journal holds an effective entry for the same kind
/// and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub id: String,
    pub kind: DecisionKind,
    pub target: String,
    pub suggested: String,
    /// Allowed answers; empty when the choice is free-form.
    pub options: Vec<String>,
    pub evidence: Vec<Evidence>,
    /// Source text the request is about (whole sentences).
    pub excerpt: String,
    /// Byte spans inside the source document worth highlighting.
    pub spans: Vec<(usize, usize)>,
    /// Whether later stages must wait for an answer.
    pub blocking: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Evidence {
    pub fn new(kind: impl Into<String>) -> Self {
        Evidence { kind: kind.into(), score: None, sentence: None, note: String::new() }
    }

    pub fn score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn sentence(mut self, id: impl Into<String>) -> Self {
        self.sentence = Some(id.into());
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

impl DecisionRequest {
    pub fn new(kind: DecisionKind, target: impl Into<String>, suggested: impl Into<String>) -> Self {
        let target = target.into();
        DecisionRequest {
            id: request_id(kind, &target),
            kind,
            target,
            suggested: suggested.into(),
            options: Vec::new(),
            evidence: Vec::new(),
            excerpt: String::new(),
            spans: Vec::new(),
            blocking: true,
        }
    }

    pub fn options<I, S>(mut self, options: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.options = options.into_iter().map(Into::into).collect();
        self
    }
}

pub fn request_id(kind: DecisionKind, target: &str) -> String {
    format!("{kind}/{target}")
}

/// Splits a request id back into kind and target.
pub fn parse_request_id(id: &str) -> Option<(DecisionKind, &str)> {
    let (kind, target) = id.split_once('/')?;
    Some((kind.parse().ok()?, target))
}

/// Append-only log of designer choices. Entries are never rewritten; a
/// later entry for the same `(kind, target)` supersedes an earlier one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionJournal {
    entries: Vec<JournalEntry>,
}

impl DecisionJournal {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a journal from entries, checking the id and ordering invariants.
    pub fn from_entries(entries: Vec<JournalEntry>) -> Result<Self, FlowError> {
        let mut journal = DecisionJournal::new();
        for entry in entries {
            journal.push(entry)?;
        }
        Ok(journal)
    }

    /// Reads JSON Lines; blank lines are ignored.
    pub fn parse_jsonl(text: &str) -> Result<Self, FlowError> {
        let mut journal = DecisionJournal::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: JournalEntry =
                serde_json::from_str(line).map_err(|e| FlowError::MalformedJournal { line: n + 1, reason: e.to_string() })?;
            journal.push(entry)?;
        }
        Ok(journal)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("journal entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `n` entries as a journal of their own.
    pub fn prefix(&self, n: usize) -> DecisionJournal {
        DecisionJournal { entries: self.entries[..n.min(self.entries.len())].to_vec() }
    }

    pub fn push(&mut self, entry: JournalEntry) -> Result<(), FlowError> {
        if self.entries.iter().any(|e| e.decision_id == entry.decision_id) {
            return Err(FlowError::DuplicateDecisionId(entry.decision_id));
        }
        // Supersession is positional; two entries for one target stamped with
        // the same instant but different choices cannot be ordered.
        if let Some(prev) = self.entries.iter().rev().find(|e| e.kind == entry.kind && e.target == entry.target) {
            if prev.timestamp == entry.timestamp && prev.choice != entry.choice {
                return Err(FlowError::ConflictingDecisions(request_id(entry.kind, &entry.target)));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Appends a new entry with the next sequential id and returns it.
    pub fn append(
        &mut self,
        kind: DecisionKind,
        target: impl Into<String>,
        choice: impl Into<String>,
        author: impl Into<String>,
        timestamp: impl Into<String>,
    ) -> Result<&JournalEntry, FlowError> {
        let entry = JournalEntry {
            decision_id: self.next_id(),
            kind,
            target: target.into(),
            choice: choice.into(),
            author: author.into(),
            timestamp: timestamp.into(),
        };
        self.push(entry)?;
        Ok(self.entries.last().expect("just pushed"))
    }

    fn next_id(&self) -> String {
        let mut n = self.entries.len() + 1;
        loop {
            let id = format!("j-{n:04}");
            if !self.entries.iter().any(|e| e.decision_id == id) {
                return id;
            }
            n += 1;
        }
    }

    /// Effective (latest) entry for a kind and target.
    pub fn latest(&self, kind: DecisionKind, target: &str) -> Option<&JournalEntry> {
        self.entries.iter().rev().find(|e| e.kind == kind && e.target == target)
    }

    pub fn choice(&self, kind: DecisionKind, target: &str) -> Option<&str> {
        self.latest(kind, target).map(|e| e.choice.as_str())
    }

    /// All effective entries keyed by `(kind, target)`.
    pub fn effective(&self) -> BTreeMap<(DecisionKind, &str), &JournalEntry> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            out.insert((e.kind, e.target.as_str()), e);
        }
        out
    }

    /// Effective entries of one kind, keyed by target.
    pub fn effective_of(&self, kind: DecisionKind) -> BTreeMap<&str, &JournalEntry> {
        self.effective().into_iter().filter(|((k, _), _)| *k == kind).map(|((_, t), e)| (t, e)).collect()
    }

    /// SHA-256 of the canonical JSON Lines rendering.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}
