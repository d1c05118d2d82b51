//! Requirements documents and per-sentence dependency graphs.

mod conllu;
mod pos;
mod segment;
mod shallow;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conllu::{ingest_conllu, write_conllu};
pub use pos::{PosTagger, BUNDLED_POS_LEXICON};
pub use segment::segment_document;
pub use shallow::{shallow_parse, ShallowParser};
pub use tokenize::{tokenize, RawToken};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("malformed CoNLL-U at line {line}: {reason}")]
    MalformedConllu { line: usize, reason: String },
    #[error("HEAD links of sentence `{0}` form a cycle")]
    CyclicParse(String),
    #[error("sentence `{0}` has no finite verb")]
    UnparsableSentence(String),
    #[error("no recognised section heading in document")]
    MissingSection,
    #[error("duplicate requirement item `{0}`")]
    DuplicateItem(String),
    #[error("POS lexicon line {line}: {reason}")]
    MalformedLexicon { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub pos: String,
    /// `[start, end)` byte offsets into the source document.
    pub char_span: (usize, usize),
}

impl Token {
    pub fn is_noun(&self) -> bool {
        self.pos.starts_with("NN")
    }

    pub fn is_verb(&self) -> bool {
        self.pos.starts_with("VB") || self.pos == "MD"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DependencyEdge {
    /// 0 is the virtual root.
    pub head: usize,
    pub dependent: usize,
    pub relation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    Summary,
    General,
    SituationSpecific,
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SectionKind::Summary => "Summary",
            SectionKind::General => "General",
            SectionKind::SituationSpecific => "SituationSpecific",
        })
    }
}

/// A `(head lemma, relation, dependent lemma)` triple.
pub type RoleTriple = (String, String, String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceGraph {
    pub sentence_id: String,
    pub tokens: Vec<Token>,
    pub edges: Vec<DependencyEdge>,
    pub source_section: SectionKind,
}

impl SentenceGraph {
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn root(&self) -> Option<usize> {
        self.edges.iter().find(|e| e.head == 0).map(|e| e.dependent)
    }

    pub fn head_of(&self, dependent: usize) -> Option<&DependencyEdge> {
        self.edges.iter().find(|e| e.dependent == dependent)
    }

    pub fn children(&self, head: usize) -> impl Iterator<Item = &DependencyEdge> {
        self.edges.iter().filter(move |e| e.head == head)
    }

    pub fn child_with(&self, head: usize, relation: &str) -> Option<usize> {
        self.children(head).find(|e| e.relation == relation).map(|e| e.dependent)
    }

    /// Token indices dominated by `head`, including itself, in order.
    pub fn subtree(&self, head: usize) -> Vec<usize> {
        let mut out = BTreeSet::from([head]);
        let mut stack = vec![head];
        while let Some(n) = stack.pop() {
            for e in self.children(n) {
                if out.insert(e.dependent) {
                    stack.push(e.dependent);
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn role_triples(&self, relations: &[&str]) -> BTreeSet<RoleTriple> {
        self.edges
            .iter()
            .filter(|e| relations.contains(&e.relation.as_str()) && e.head != 0)
            .filter_map(|e| {
                let h = self.token(e.head)?;
                let d = self.token(e.dependent)?;
                Some((h.lemma.clone(), e.relation.clone(), d.lemma.clone()))
            })
            .collect()
    }

    /// Like [`SentenceGraph::role_triples`] but with the words as written.
    pub fn surface_triples(&self, relations: &[&str]) -> BTreeSet<RoleTriple> {
        self.edges
            .iter()
            .filter(|e| relations.contains(&e.relation.as_str()) && e.head != 0)
            .filter_map(|e| {
                let h = self.token(e.head)?;
                let d = self.token(e.dependent)?;
                Some((h.surface.clone(), e.relation.clone(), d.surface.clone()))
            })
            .collect()
    }

    /// Checks the tree shape: contiguous indices, one head per token,
    /// exactly one root edge, no cycles.
    pub fn check_tree(&self) -> Result<(), TextError> {
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(TextError::MalformedConllu {
                    line: 0,
                    reason: format!("token indices of `{}` are not contiguous", self.sentence_id),
                });
            }
        }
        let mut heads: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &self.edges {
            if e.dependent == 0 || e.dependent > n || e.head > n {
                return Err(TextError::MalformedConllu {
                    line: 0,
                    reason: format!("edge {}->{} out of range in `{}`", e.head, e.dependent, self.sentence_id),
                });
            }
            if heads.insert(e.dependent, e.head).is_some() {
                return Err(TextError::MalformedConllu {
                    line: 0,
                    reason: format!("token {} of `{}` has two heads", e.dependent, self.sentence_id),
                });
            }
        }
        if has_cycle(&heads) {
            return Err(TextError::CyclicParse(self.sentence_id.clone()));
        }
        let roots = self.edges.iter().filter(|e| e.head == 0).count();
        if heads.len() != n || (n > 0 && roots != 1) {
            return Err(TextError::MalformedConllu { line: 0, reason: format!("`{}` is not a single-rooted tree", self.sentence_id) });
        }
        Ok(())
    }
}

pub(crate) fn has_cycle(heads: &BTreeMap<usize, usize>) -> bool {
    for &start in heads.keys() {
        let mut seen = BTreeSet::new();
        let mut cur = start;
        while cur != 0 {
            if !seen.insert(cur) {
                return true;
            }
            match heads.get(&cur) {
                Some(&h) => cur = h,
                None => break,
            }
        }
    }
    false
}

/// A sentence of the source document. Sub-items of an enumeration are
/// parsed together with the lead-in clause of their parent ("every car
/// needs to:"), recorded as `stem`; the stem's tokens keep their own offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSentence {
    pub id: String,
    pub text: String,
    pub span: (usize, usize),
    pub section: SectionKind,
    pub item: Option<String>,
    pub stem: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementItem {
    /// Outline label such as `1` or `1(d)`.
    pub item_id: String,
    /// Position of the item in the document, starting at 0.
    pub order: usize,
    pub section: SectionKind,
    pub parent: Option<String>,
    pub children: Vec<String>,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementsDocument {
    pub title: String,
    pub source: String,
    pub sections: Vec<Section>,
    pub sentences: Vec<DocumentSentence>,
    pub requirement_items: Vec<RequirementItem>,
    /// Parses keyed by sentence id; filled by [`RequirementsDocument::parse_with`]
    /// or [`RequirementsDocument::attach_conllu`].
    #[serde(default)]
    pub graphs: BTreeMap<String, SentenceGraph>,
}

impl RequirementsDocument {
    pub fn sentence(&self, id: &str) -> Option<&DocumentSentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    pub fn item(&self, item_id: &str) -> Option<&RequirementItem> {
        self.requirement_items.iter().find(|i| i.item_id == item_id)
    }

    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    /// `(offset, text)` pieces a sentence is parsed from: stem first, if any.
    pub fn parse_segments<'a>(&'a self, sentence: &'a DocumentSentence) -> Vec<(usize, &'a str)> {
        let mut out = Vec::with_capacity(2);
        if let Some((s, e)) = sentence.stem {
            out.push((s, &self.source[s..e]));
        }
        out.push((sentence.span.0, sentence.text.as_str()));
        out
    }

    /// Text handed to a parser for `sentence`: stem and body joined by a space.
    pub fn parse_text(&self, sentence: &DocumentSentence) -> String {
        self.parse_segments(sentence).iter().map(|(_, t)| *t).collect::<Vec<_>>().join(" ")
    }

    /// Runs the shallow parser over every sentence. Sentences without a
    /// finite verb are left unparsed (and reported back).
    pub fn parse_with(&mut self, parser: &ShallowParser) -> Vec<String> {
        let mut unparsed = Vec::new();
        let mut graphs = BTreeMap::new();
        for s in &self.sentences {
            match parser.parse_segments(&s.id, s.section, &self.parse_segments(s)) {
                Ok(g) => {
                    graphs.insert(s.id.clone(), g);
                }
                Err(e) => {
                    log::warn!("{e}; treating sentence as prose");
                    unparsed.push(s.id.clone());
                }
            }
        }
        self.graphs = graphs;
        unparsed
    }

    /// Attaches externally produced parses. Sentences are matched by
    /// `# sent_id`; token offsets are recomputed against the document.
    pub fn attach_conllu(&mut self, conllu: &str) -> Result<(), TextError> {
        let parsed = ingest_conllu(conllu)?;
        let mut graphs = BTreeMap::new();
        for mut g in parsed {
            let Some(s) = self.sentence(&g.sentence_id) else {
                return Err(TextError::MalformedConllu { line: 0, reason: format!("sentence `{}` is not in the document", g.sentence_id) });
            };
            g.source_section = s.section;
            let spans = tokenize::align(&self.parse_segments(s), g.tokens.iter().map(|t| t.surface.as_str())).ok_or_else(|| {
                TextError::MalformedConllu { line: 0, reason: format!("tokens of `{}` do not match the document text", g.sentence_id) }
            })?;
            for (t, span) in g.tokens.iter_mut().zip(spans) {
                t.char_span = span;
            }
            graphs.insert(g.sentence_id.clone(), g);
        }
        self.graphs = graphs;
        Ok(())
    }
}
