//! Rule-based shallow dependency parser for controlled requirements English.
//!
//! The accepted subset: declarative clauses with one finite main verb,
//! optional obligation constructions ("needs to", "has to", modals),
//! possessives ("its", "their"), parenthesised appositives, prepositional
//! phrases, coordination with "and"/"or", subordinate clauses introduced by
//! "when", "if", "while", "whether", "in order to", relative clauses with
//! "which", and copular comparisons ("is more than 5km far from X").
//! Output labels follow the Stanford basic dependency scheme.

use std::sync::OnceLock;

use super::pos::PosTagger;
use super::tokenize::{tokenize, RawToken};
use super::{DependencyEdge, SectionKind, SentenceGraph, TextError, Token};

const ROOT: usize = usize::MAX;

const AUX_LEMMAS: &[&str] = &["be", "have", "do", "will", "shall", "should", "would", "can", "could", "may", "might", "must"];
const ADVERBIAL_MARKERS: &[&str] = &["when", "if", "while", "because", "although", "unless", "until", "whenever"];
const CONTROL_VERBS: &[&str] = &["allow", "enable", "ask", "require", "permit", "cause", "help", "force", "want"];
const COMPARATOR_WORDS: &[&str] = &[
    "more", "less", "equal", "to", "or", "than", "at", "least", "most", "exactly", "greater", "fewer", "smaller", "larger", "higher",
    "lower", "above", "below", "under", "over",
];

pub struct ShallowParser {
    tagger: PosTagger,
}

impl Default for ShallowParser {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Parses one sentence with the bundled lexicon; the graph gets id `s1`.
pub fn shallow_parse(sentence: &str) -> Result<SentenceGraph, TextError> {
    static PARSER: OnceLock<ShallowParser> = OnceLock::new();
    PARSER.get_or_init(ShallowParser::bundled).parse("s1", sentence)
}

impl ShallowParser {
    pub fn new(tagger: PosTagger) -> Self {
        ShallowParser { tagger }
    }

    pub fn bundled() -> Self {
        Self::new(PosTagger::bundled())
    }

    pub fn parse(&self, sentence_id: &str, sentence: &str) -> Result<SentenceGraph, TextError> {
        self.parse_segments(sentence_id, SectionKind::General, &[(0, sentence)])
    }

    /// Parses the concatenation of `pieces`; token offsets are taken from
    /// the pieces, so they point into whatever text the pieces came from.
    pub fn parse_segments(&self, sentence_id: &str, section: SectionKind, pieces: &[(usize, &str)]) -> Result<SentenceGraph, TextError> {
        let raw = tokenize(pieces);
        let tagged = self.tagger.tag(&raw);
        let mut parse = Parse::new(&raw, tagged);
        parse.run().ok_or_else(|| TextError::UnparsableSentence(sentence_id.to_string()))?;
        let graph = parse.into_graph(sentence_id, section);
        graph.check_tree()?;
        Ok(graph)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Np { head: usize, start: usize, end: usize },
    Chain(Chain),
    Tok(usize),
}

impl Unit {
    fn start(&self) -> usize {
        match self {
            Unit::Np { start, .. } => *start,
            Unit::Chain(c) => c.start,
            Unit::Tok(i) => *i,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Chain {
    start: usize,
    end: usize,
    /// Head of the verb group as a whole ("needs" in "needs to monitor").
    matrix: usize,
    /// Verb that takes objects ("monitor").
    target: usize,
    passive: bool,
    infinitival: bool,
    bare_participle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Main,
    Adverbial,
    Complement,
    Relative,
    Paren,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Last {
    None,
    Np(usize),
    Pred,
    Modifier(usize),
}

#[derive(Debug)]
struct Frame {
    kind: Kind,
    marks: Vec<usize>,
    antecedent: Option<usize>,
    subj: Option<usize>,
    pred: Option<usize>,
    obj_target: Option<usize>,
    conj_base: Option<usize>,
    has_obj: bool,
    last: Last,
    last_noun: Option<usize>,
    last_prep: Option<usize>,
    pending_prep: Option<usize>,
    pending_cc: Option<usize>,
    /// Dependents waiting for the clause predicate: (token, relation).
    deferred: Vec<(usize, &'static str)>,
    /// Parenthetical content without a predicate attaches here.
    first_head: Option<(usize, &'static str)>,
}

impl Frame {
    fn new(kind: Kind) -> Self {
        Frame {
            kind,
            marks: Vec::new(),
            antecedent: None,
            subj: None,
            pred: None,
            obj_target: None,
            conj_base: None,
            has_obj: false,
            last: Last::None,
            last_noun: None,
            last_prep: None,
            pending_prep: None,
            pending_cc: None,
            deferred: Vec::new(),
            first_head: None,
        }
    }

    /// Where verbal dependents (preps, adverbs, objects) go.
    fn verbal_head(&self) -> Option<usize> {
        self.obj_target.or(self.pred)
    }
}

struct Parse<'a> {
    raw: &'a [RawToken],
    tags: Vec<String>,
    lemmas: Vec<String>,
    lower: Vec<String>,
    heads: Vec<Option<(usize, &'static str)>>,
    /// Token consumed by a multiword construction and already attached.
    consumed: Vec<bool>,
    /// Comparator constructions: copula index -> predicate head.
    root: Option<usize>,
}

impl<'a> Parse<'a> {
    fn new(raw: &'a [RawToken], tagged: Vec<(String, String)>) -> Self {
        let n = raw.len();
        let (tags, lemmas): (Vec<_>, Vec<_>) = tagged.into_iter().unzip();
        Parse {
            raw,
            tags,
            lemmas,
            lower: raw.iter().map(|t| t.surface.to_lowercase()).collect(),
            heads: vec![None; n],
            consumed: vec![false; n],
            root: None,
        }
    }

    fn len(&self) -> usize {
        self.raw.len()
    }

    fn tag(&self, i: usize) -> &str {
        self.tags.get(i).map_or("", String::as_str)
    }

    fn word(&self, i: usize) -> &str {
        self.lower.get(i).map_or("", String::as_str)
    }

    fn attach(&mut self, dep: usize, head: usize, rel: &'static str) {
        if dep != head && self.heads[dep].is_none() {
            self.heads[dep] = Some((head, rel));
        }
    }

    fn is_noun(&self, i: usize) -> bool {
        self.tag(i).starts_with("NN") || self.tag(i) == "PRP"
    }

    fn is_verb(&self, i: usize) -> bool {
        self.tag(i).starts_with("VB") || self.tag(i) == "MD"
    }

    fn is_punct(&self, i: usize) -> bool {
        matches!(self.tag(i), "," | "." | ":" | "-LRB-" | "-RRB-" | "''" | "``")
    }

    fn into_graph(self, sentence_id: &str, section: SectionKind) -> SentenceGraph {
        let tokens = self
            .raw
            .iter()
            .enumerate()
            .map(|(i, t)| Token {
                index: i + 1,
                surface: t.surface.clone(),
                lemma: self.lemmas[i].clone(),
                pos: self.tags[i].clone(),
                char_span: (t.start, t.end),
            })
            .collect();
        let edges = self
            .heads
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let (head, rel) = h.expect("every token is attached");
                DependencyEdge { head: if head == ROOT { 0 } else { head + 1 }, dependent: i + 1, relation: rel.to_string() }
            })
            .collect();
        SentenceGraph { sentence_id: sentence_id.to_string(), tokens, edges, source_section: section }
    }

    fn run(&mut self) -> Option<()> {
        self.multiword();
        let units = self.units();
        if !units.iter().any(|u| matches!(u, Unit::Chain(_))) {
            return None;
        }
        self.clauses(&units);
        let root = self.root?;
        for i in 0..self.len() {
            if self.heads[i].is_none() && i != root {
                let rel = if self.is_punct(i) { "punct" } else { "dep" };
                self.heads[i] = Some((root, rel));
            }
        }
        self.break_cycles(root);
        Some(())
    }

    /// Safety net: any token whose head chain does not reach the root is
    /// re-attached to the root.
    fn break_cycles(&mut self, root: usize) {
        for start in 0..self.len() {
            let mut cur = start;
            let mut steps = 0;
            while cur != ROOT && steps <= self.len() {
                cur = self.heads[cur].map_or(ROOT, |(h, _)| h);
                steps += 1;
            }
            if cur != ROOT && start != root {
                self.heads[start] = Some((root, "dep"));
            }
        }
    }

    /// "in order to", "at least" and friends.
    fn multiword(&mut self) {
        for i in 0..self.len() {
            if self.word(i) == "in" && self.word(i + 1) == "order" && self.word(i + 2) == "to" {
                self.heads[i + 1] = Some((i, "mwe"));
                self.consumed[i + 1] = true;
            }
            if self.word(i) == "at" && matches!(self.word(i + 1), "least" | "most") && !self.tag(i + 2).starts_with("CD") {
                self.heads[i + 1] = Some((i, "mwe"));
                self.consumed[i + 1] = true;
            }
        }
    }

    fn units(&self) -> Vec<Unit> {
        let mut units = Vec::new();
        let mut i = 0;
        while i < self.len() {
            if self.consumed[i] {
                i += 1;
                continue;
            }
            if let Some(end) = self.np_end(i) {
                let head = (i..end).rev().find(|&k| self.is_noun(k) || self.tag(k) == "CD" || self.tag(k) == "DT").unwrap();
                units.push(Unit::Np { head, start: i, end });
                i = end;
            } else if let Some(chain) = self.chain_at(i) {
                i = chain.end;
                units.push(Unit::Chain(chain));
            } else {
                units.push(Unit::Tok(i));
                i += 1;
            }
        }
        units
    }

    /// End (exclusive) of a noun phrase starting at `i`, if one does.
    fn np_end(&self, i: usize) -> Option<usize> {
        let t = self.tag(i);
        if t == "PRP" {
            return Some(i + 1);
        }
        if t == "DT" && matches!(self.word(i), "that" | "this") && (i + 1 >= self.len() || self.is_punct(i + 1)) {
            return Some(i + 1);
        }
        let mut j = i;
        if matches!(t, "DT" | "PDT" | "PRP$") {
            j += 1;
        }
        let mut last_noun = None;
        let mut seen_noun = false;
        while j < self.len() && !self.consumed[j] {
            let tj = self.tag(j);
            let next_nominal = |k: usize| {
                let tk = self.tag(k);
                tk.starts_with("NN") || tk.starts_with("JJ") || tk == "CD"
            };
            let ok = if tj.starts_with("NN") {
                true
            } else if tj == "CD" {
                !seen_noun
            } else if seen_noun {
                false
            } else if tj.starts_with("JJ") {
                // "more than", "equal to" are comparators, not modifiers.
                next_nominal(j + 1)
            } else if tj == "RB" {
                self.tag(j + 1).starts_with("JJ") && next_nominal(j + 2)
            } else if tj == "VBG" || tj == "VBN" {
                j > i && self.tag(j + 1).starts_with("NN")
            } else {
                false
            };
            if !ok {
                break;
            }
            if tj.starts_with("NN") {
                seen_noun = true;
                last_noun = Some(j);
            } else if tj == "CD" && !(j + 1 < self.len() && self.tag(j + 1).starts_with("NN")) {
                last_noun = Some(j);
            }
            j += 1;
        }
        // A noun directly followed by "to" + verb is still a noun ("a plan
        // to follow"); a noun tagged as such but followed by a possessive
        // determiner is a verb we mis-tagged -- not handled.
        last_noun.map(|k| k + 1)
    }

    fn verbal_at(&self, k: usize) -> bool {
        self.is_verb(k) || (self.tag(k) == "TO" && self.infinitive_follows(k))
    }

    fn infinitive_follows(&self, to: usize) -> bool {
        let mut k = to + 1;
        while self.tag(k) == "RB" {
            k += 1;
        }
        self.tag(k) == "VB"
    }

    fn chain_at(&self, i: usize) -> Option<Chain> {
        let first_ok = self.is_verb(i)
            || (self.tag(i) == "TO" && self.infinitive_follows(i))
            || (self.tag(i) == "RB" && {
                let mut k = i;
                while self.tag(k) == "RB" {
                    k += 1;
                }
                k < self.len() && self.verbal_at(k) && k > i
            });
        if !first_ok {
            return None;
        }
        let mut j = i;
        let mut tokens = Vec::new();
        while j < self.len() && !self.consumed[j] {
            let t = self.tag(j);
            let take = if self.is_verb(j) {
                // A participle right after a noun-phrase-internal position is
                // handled by the chunker; here every verb tag joins.
                true
            } else if t == "TO" {
                self.infinitive_follows(j)
            } else if t == "RB" {
                let mut k = j;
                while self.tag(k) == "RB" {
                    k += 1;
                }
                k < self.len() && self.verbal_at(k)
            } else {
                false
            };
            if !take {
                break;
            }
            tokens.push(j);
            j += 1;
        }
        if !tokens.iter().any(|&k| self.is_verb(k)) {
            return None;
        }
        Some(Chain {
            start: i,
            end: j,
            matrix: i,
            target: i,
            passive: false,
            infinitival: self.tag(i) == "TO",
            bare_participle: self.tag(i) == "VBN",
        })
    }

    /// Attaches the tokens of a verb chain internally; returns the chain
    /// with `matrix`, `target` and `passive` filled in. A trailing copula is
    /// resolved against its complement, which becomes the predicate.
    fn resolve_chain(&mut self, mut c: Chain, next: Option<Unit>) -> (Chain, Option<usize>) {
        let toks: Vec<usize> = (c.start..c.end).collect();
        // Segments start at each infinitival "to" and after a non-auxiliary
        // verb followed by another verb.
        let mut segments: Vec<Vec<usize>> = vec![Vec::new()];
        for (n, &k) in toks.iter().enumerate() {
            let seg = segments.last_mut().unwrap();
            if self.tag(k) == "TO" && !seg.is_empty() {
                segments.push(vec![k]);
                continue;
            }
            seg.push(k);
            let next_verb = toks.get(n + 1).is_some_and(|&m| self.is_verb(m));
            if self.is_verb(k) && next_verb && !self.is_aux(k, &toks[n + 1..]) {
                segments.push(Vec::new());
            }
        }
        segments.retain(|s| s.iter().any(|&k| self.is_verb(k)));
        let mut contents = Vec::new();
        let mut passive_segments = Vec::new();
        for seg in &segments {
            let content = *seg.iter().rev().find(|&&k| self.is_verb(k) && self.tag(k) != "MD").unwrap_or(&seg[0]);
            let mut passive = false;
            for &k in seg {
                if k == content {
                    continue;
                }
                let rel = match self.tag(k) {
                    "MD" | "TO" => "aux",
                    "RB" if self.word(k) == "not" => "neg",
                    "RB" => "advmod",
                    _ if self.lemmas[k] == "be" && self.tag(content) == "VBN" => {
                        passive = true;
                        "auxpass"
                    }
                    _ => "aux",
                };
                self.attach(k, content, rel);
            }
            contents.push(content);
            passive_segments.push(passive);
        }
        for w in contents.windows(2) {
            self.attach(w[1], w[0], "xcomp");
        }
        // Tokens of the chain outside any verb segment (a dangling "to").
        for &k in &toks {
            if !contents.contains(&k) && self.heads[k].is_none() {
                self.attach(k, contents[0], "dep");
            }
        }
        c.matrix = contents[0];
        c.target = *contents.last().unwrap();
        c.passive = *passive_segments.last().unwrap();

        let mut predicate = None;
        if self.lemmas[c.target] == "be" && !toks.iter().any(|&k| self.tag(k) == "TO" && k > c.target) {
            predicate = self.copula_complement(c.target, c.end, next);
            if let Some(p) = predicate {
                // Dependents of the copula move to the predicate.
                for k in c.start..c.end {
                    if let Some((h, rel)) = self.heads[k] {
                        if h == c.target {
                            self.heads[k] = Some((p, rel));
                        }
                    }
                }
                if let Some((h, rel)) = self.heads[c.target] {
                    self.heads[c.target] = None;
                    // "would be enough": the copula hung under a matrix verb.
                    if h != p {
                        self.attach(p, h, rel);
                    }
                }
                self.attach(c.target, p, "cop");
                if c.matrix == c.target {
                    c.matrix = p;
                }
                c.target = p;
            }
        }
        (c, predicate)
    }

    fn is_aux(&self, k: usize, rest: &[usize]) -> bool {
        if self.tag(k) == "MD" {
            return true;
        }
        // "has to": a following "to" makes "have" a main verb.
        AUX_LEMMAS.contains(&self.lemmas[k].as_str()) && rest.first().is_some_and(|&m| self.tag(m) != "TO")
    }

    /// Finds the predicate head after a copula ending at `end`: an adjective
    /// ("possible", "closer"), a comparison ("more than 5km far") or a noun
    /// phrase. Attaches the material in between.
    fn copula_complement(&mut self, cop: usize, end: usize, _next: Option<Unit>) -> Option<usize> {
        let mut k = end;
        let mut adverbs = Vec::new();
        while self.tag(k) == "RB" && !matches!(self.word(k), "far") && !self.tag(k + 1).starts_with("CD") {
            adverbs.push(k);
            k += 1;
        }
        // Comparison: comparator words, a number with unit, then optionally
        // an adjective/adverb head.
        let mut m = k;
        while m < self.len() && COMPARATOR_WORDS.contains(&self.word(m)) {
            m += 1;
        }
        if m > k && self.tag(m) == "CD" {
            let num = m;
            let mut unit = None;
            if self.tag(m + 1).starts_with("NN") {
                unit = Some(m + 1);
            }
            let after = unit.map_or(num + 1, |u| u + 1);
            let pred = if matches!(self.tag(after), "RB" | "JJ" | "JJR") { Some(after) } else { None };
            let measure = unit.unwrap_or(num);
            if let Some(u) = unit {
                self.attach(num, u, "num");
            }
            self.attach(k, num, "quantmod");
            for w in k + 1..m {
                self.attach(w, k, "mwe");
            }
            let head = match pred {
                Some(p) => {
                    self.attach(measure, p, "npadvmod");
                    p
                }
                None => measure,
            };
            for a in adverbs {
                self.attach(a, head, if self.word(a) == "not" { "neg" } else { "advmod" });
            }
            let _ = cop;
            return Some(head);
        }
        if self.tag(k).starts_with("JJ") || (self.tag(k) == "RB" && matches!(self.word(k), "far" | "enough")) {
            for a in adverbs {
                self.attach(a, k, if self.word(a) == "not" { "neg" } else { "advmod" });
            }
            return Some(k);
        }
        if adverbs.is_empty() {
            if let Some(end) = self.np_end(k) {
                let head = (k..end).rev().find(|&x| self.is_noun(x)).unwrap_or(end - 1);
                if self.tag(k) != "IN" {
                    return Some(head);
                }
            }
        }
        None
    }

    fn clauses(&mut self, units: &[Unit]) {
        let mut stack: Vec<Frame> = vec![Frame::new(Kind::Main)];
        let mut pending_adv: Vec<usize> = Vec::new();
        let mut pending_at: Option<usize> = None;
        let mut skip_until = 0usize;
        for (ui, unit) in units.iter().enumerate() {
            if unit.start() < skip_until {
                continue;
            }
            let next = units.get(ui + 1).copied();
            match *unit {
                Unit::Np { head, start, end } => {
                    self.np_internal(start, end, head);
                    let f = stack.last_mut().unwrap();
                    if let Some(at) = pending_at.take() {
                        self.heads[at] = Some((head, "advmod"));
                    }
                    let f_last = f.last;
                    let rel_and_head: Option<(usize, &'static str)> = if let Some(p) = f.pending_prep.take() {
                        Some((p, "pobj"))
                    } else if let (Some(cc), Last::Np(prev)) = (f.pending_cc, f_last) {
                        f.pending_cc = None;
                        self.heads[cc] = Some((prev, "cc"));
                        Some((prev, "conj"))
                    } else if f.pred.is_none() {
                        if let Some(subj) = f.subj {
                            Some((subj, "dep"))
                        } else {
                            f.subj = Some(head);
                            if f.kind == Kind::Paren && f.first_head.is_none() {
                                f.first_head = Some((head, "dep"));
                            }
                            None
                        }
                    } else if !f.has_obj && f_last == Last::Pred {
                        f.has_obj = true;
                        Some((f.verbal_head().unwrap(), "dobj"))
                    } else {
                        Some((f.verbal_head().unwrap(), "npadvmod"))
                    };
                    if let Some((h, rel)) = rel_and_head {
                        self.attach(head, h, rel);
                    }
                    for a in pending_adv.drain(..) {
                        self.attach(a, head, "advmod");
                    }
                    f.last = Last::Np(head);
                    f.last_noun = Some(head);
                }
                Unit::Chain(chain) => {
                    let (c, _) = self.resolve_chain(chain, next);
                    let f = stack.last_mut().unwrap();
                    if c.infinitival && f.pred.is_some() {
                        let via = match f.last {
                            Last::Np(_) if f.has_obj && f.obj_target.is_some_and(|v| CONTROL_VERBS.contains(&self.lemmas[v].as_str())) => {
                                (f.obj_target.unwrap(), "xcomp")
                            }
                            Last::Np(n) => (n, "vmod"),
                            Last::Modifier(m) if self.tag(m).starts_with("JJ") || self.word(m) == "enough" => (m, "xcomp"),
                            _ => (f.verbal_head().unwrap(), "xcomp"),
                        };
                        self.attach(c.matrix, via.0, via.1);
                        f.conj_base = Some(c.target);
                    } else if c.bare_participle && f.pred.is_some() && matches!(f.last, Last::Np(_)) {
                        let Last::Np(n) = f.last else { unreachable!() };
                        self.attach(c.matrix, n, "vmod");
                        f.conj_base = Some(c.target);
                    } else if f.pred.is_none() {
                        f.pred = Some(c.matrix);
                        f.conj_base = Some(c.target);
                        if let Some(s) = f.subj {
                            self.attach(s, c.matrix, if c.passive { "nsubjpass" } else { "nsubj" });
                        }
                        for (d, rel) in std::mem::take(&mut f.deferred) {
                            self.attach(d, c.matrix, rel);
                        }
                    } else if let Some(cc) = f.pending_cc.take() {
                        let base = f.conj_base.or(f.pred).expect("checked above");
                        self.attach(cc, base, "cc");
                        self.attach(c.matrix, base, "conj");
                        f.conj_base = Some(c.target);
                    } else {
                        self.attach(c.matrix, f.verbal_head().unwrap(), "dep");
                        f.conj_base = Some(c.target);
                    }
                    for a in pending_adv.drain(..) {
                        self.attach(a, c.target, "advmod");
                    }
                    f.obj_target = Some(c.target);
                    f.has_obj = false;
                    f.last = if c.target != chain.target && !self.is_verb(c.target) {
                        // Copular predicate: its complement was consumed.
                        skip_until = (c.target + 1).max(c.end);
                        Last::Modifier(c.target)
                    } else {
                        Last::Pred
                    };
                }
                Unit::Tok(i) => {
                    let w = self.word(i).to_string();
                    let t = self.tag(i).to_string();
                    if t == "-LRB-" {
                        let close = (i + 1..self.len()).find(|&k| self.tag(k) == "-RRB-");
                        let f = stack.last_mut().unwrap();
                        let antecedent = match f.last {
                            Last::Np(n) => Some(self.phrase_head(n)),
                            Last::Modifier(m) => Some(m),
                            _ => f.last_noun,
                        };
                        // "( NP )" directly after a noun: apposition.
                        if let (Some(close), Some(Unit::Np { head, start, end }), Some(ant)) = (close, next, antecedent) {
                            if start == i + 1 && end == close && matches!(f.last, Last::Np(_)) {
                                self.np_internal(start, end, head);
                                self.attach(head, ant, "appos");
                                self.attach(i, head, "punct");
                                self.attach(close, head, "punct");
                                skip_until = close + 1;
                                continue;
                            }
                        }
                        let mut frame = Frame::new(Kind::Paren);
                        frame.antecedent = antecedent.or(f.verbal_head());
                        frame.marks.push(i);
                        stack.push(frame);
                        continue;
                    }
                    if t == "-RRB-" {
                        while stack.len() > 1 {
                            let kind = stack.last().unwrap().kind;
                            let mut done = self.close_frame(&mut stack);
                            if kind == Kind::Paren {
                                if let Some(h) = done.take() {
                                    self.attach(i, h, "punct");
                                }
                                break;
                            }
                        }
                        continue;
                    }
                    let f = stack.last_mut().unwrap();
                    if t == "," {
                        let parent_has_pred = stack.len() >= 2 && stack[stack.len() - 2].pred.is_some();
                        let f = stack.last().unwrap();
                        if matches!(f.kind, Kind::Adverbial) && f.pred.is_some() && !parent_has_pred {
                            let h = self.close_frame(&mut stack);
                            if let Some(h) = h {
                                self.attach(i, h, "punct");
                            }
                        }
                        continue;
                    }
                    if matches!(t.as_str(), "." | ":") {
                        continue;
                    }
                    if ADVERBIAL_MARKERS.contains(&w.as_str()) || (w == "in" && self.word(i + 1) == "order") {
                        let mut frame = Frame::new(Kind::Adverbial);
                        frame.marks.push(i);
                        stack.push(frame);
                        continue;
                    }
                    if w == "whether" {
                        let mut frame = Frame::new(Kind::Complement);
                        frame.marks.push(i);
                        stack.push(frame);
                        continue;
                    }
                    if t == "WDT" || (t == "WP" && w == "who") {
                        let antecedent = match f.kind {
                            Kind::Paren if f.last_noun.is_none() => None,
                            _ => f.last_noun.or(f.verbal_head()),
                        };
                        let mut frame = Frame::new(Kind::Relative);
                        frame.antecedent = antecedent;
                        frame.subj = Some(i);
                        stack.push(frame);
                        continue;
                    }
                    if t == "CC" {
                        f.pending_cc = Some(i);
                        continue;
                    }
                    if w == "at" && self.consumed.get(i + 1) == Some(&true) {
                        pending_at = Some(i);
                        continue;
                    }
                    if t == "IN" || t == "TO" {
                        let rel_head = if let (Some(cc), Some(lp)) = (f.pending_cc, f.last_prep) {
                            f.pending_cc = None;
                            self.attach(cc, lp, "cc");
                            Some((lp, "conj"))
                        } else {
                            match f.last {
                                Last::Np(n) => Some((n, "prep")),
                                Last::Modifier(m) => Some((m, "prep")),
                                _ => f.verbal_head().map(|v| (v, "prep")),
                            }
                        };
                        match rel_head {
                            Some((h, rel)) => self.attach(i, h, rel),
                            None => match f.kind {
                                Kind::Paren if f.antecedent.is_some() && f.first_head.is_none() => {
                                    f.first_head = Some((i, "prep"));
                                }
                                _ => f.deferred.push((i, "prep")),
                            },
                        }
                        for a in pending_adv.drain(..) {
                            self.attach(a, i, "advmod");
                        }
                        f.pending_prep = Some(i);
                        f.last_prep = Some(i);
                        f.last = Last::None;
                        continue;
                    }
                    if t == "FW" {
                        pending_adv.push(i);
                        continue;
                    }
                    // Adverbs and stray adjectives.
                    if let Some(at) = pending_at.take() {
                        self.heads[at] = Some((i, "advmod"));
                    }
                    match f.verbal_head() {
                        Some(v) => self.attach(i, v, "advmod"),
                        None => f.deferred.push((i, "advmod")),
                    }
                    f.last = Last::Modifier(i);
                }
            }
        }
        while stack.len() > 1 {
            self.close_frame(&mut stack);
        }
        let main = stack.pop().unwrap();
        if let Some(p) = main.pred {
            self.heads[p] = Some((ROOT, "root"));
            self.root = Some(p);
        }
        if self.root.is_none() {
            // No main predicate (a bare subordinate clause): promote the
            // first verb that has no head.
            if let Some(v) = (0..self.len()).find(|&k| self.is_verb(k) && self.heads[k].is_none()) {
                self.heads[v] = Some((ROOT, "root"));
                self.root = Some(v);
            }
        }
        if let Some(r) = self.root {
            for (d, rel) in main.deferred {
                self.attach(d, r, rel);
            }
        }
    }

    /// Pops the top frame, attaches its predicate to the parent and
    /// returns the frame's head.
    fn close_frame(&mut self, stack: &mut Vec<Frame>) -> Option<usize> {
        let f = stack.pop().unwrap();
        let parent = stack.last_mut().unwrap();
        let head = f.pred.or(f.first_head.map(|(h, _)| h)).or(f.subj);
        let head = head?;
        for &m in &f.marks {
            if f.kind != Kind::Paren {
                self.attach(m, head, "mark");
            } else {
                self.attach(m, head, "punct");
            }
        }
        for (d, rel) in &f.deferred {
            self.attach(*d, head, rel);
        }
        if let (Some(s), None) = (f.subj, f.pred) {
            if s != head {
                self.attach(s, head, "dep");
            }
        }
        let rel: &'static str = match f.kind {
            Kind::Main => "root",
            Kind::Adverbial => "advcl",
            Kind::Complement => "ccomp",
            Kind::Relative => "rcmod",
            Kind::Paren => {
                if f.pred.is_some() {
                    "dep"
                } else {
                    f.first_head.map_or("dep", |(_, r)| r)
                }
            }
        };
        if f.kind == Kind::Relative && f.antecedent.is_none() && parent.kind == Kind::Paren && parent.first_head.is_none() {
            // "(e.g., which ...)": the relative clause modifies whatever the
            // parenthetical is attached to.
            parent.first_head = Some((head, "rcmod"));
            return Some(head);
        }
        match f.kind {
            Kind::Relative | Kind::Paren => {
                if let Some(a) = f.antecedent {
                    self.attach(head, a, rel);
                } else {
                    parent.deferred.push((head, rel));
                }
            }
            _ => match parent.verbal_head() {
                Some(v) if rel == "ccomp" => self.attach(head, v, rel),
                Some(_) => self.attach(head, parent.pred.unwrap(), rel),
                None => parent.deferred.push((head, rel)),
            },
        }
        if f.kind != Kind::Paren {
            parent.last = Last::None;
        }
        Some(head)
    }

    /// For the object of "of" inside a noun phrase ("place of interest"),
    /// the noun the phrase is built on; otherwise `n` itself.
    fn phrase_head(&self, n: usize) -> usize {
        match self.heads[n] {
            Some((of, "pobj")) if self.word(of) == "of" => match self.heads[of] {
                Some((noun, "prep")) if self.is_noun(noun) => noun,
                _ => n,
            },
            _ => n,
        }
    }

    fn np_internal(&mut self, start: usize, end: usize, head: usize) {
        for k in start..end {
            if k == head {
                continue;
            }
            let t = self.tag(k);
            let rel = match t {
                "DT" | "PDT" => "det",
                "PRP$" => "poss",
                "CD" => "num",
                "RB" => {
                    self.attach(k, k + 1, "advmod");
                    continue;
                }
                t if t.starts_with("JJ") || t == "VBN" || t == "VBG" => "amod",
                t if t.starts_with("NN") => "compound",
                _ => "dep",
            };
            self.attach(k, head, rel);
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn triples(g: &SentenceGraph, rels: &[&str]) -> BTreeSet<(String, String, String)> {
        g.role_triples(rels)
    }

    fn t(h: &str, r: &str, d: &str) -> (String, String, String) {
        (h.into(), r.into(), d.into())
    }

    #[test]
    fn monitor_sentence() {
        let g = shallow_parse("Every car needs to continuously monitor its energy level (battery).").unwrap();
        assert_eq!(
            triples(&g, &["nsubj", "dobj", "appos", "poss"]),
            BTreeSet::from([
                t("need", "nsubj", "car"),
                t("monitor", "dobj", "level"),
                t("level", "appos", "battery"),
                t("level", "poss", "its"),
            ])
        );
        assert_eq!(g.token(g.root().unwrap()).unwrap().lemma, "need");
    }

    #[test]
    fn minimal_clause() {
        let g = shallow_parse("Cars park.").unwrap();
        assert_eq!(g.token(g.root().unwrap()).unwrap().surface, "park");
        assert_eq!(triples(&g, &["nsubj"]), BTreeSet::from([t("park", "nsubj", "car")]));
    }

    #[test]
    fn no_verb_is_unparsable() {
        assert_eq!(shallow_parse("The parking place."), Err(TextError::UnparsableSentence("s1".into())));
    }

    #[test]
    fn conditional_and_comparison() {
        let g = shallow_parse("When an e-car is more than 5km far from the POI, it should update its plan at least once per 60 seconds.")
            .unwrap();
        let got = triples(&g, &["nsubj", "dobj", "advcl", "pobj", "cop"]);
        assert!(got.contains(&t("far", "nsubj", "e-car")), "{got:?}");
        assert!(got.contains(&t("update", "advcl", "far")), "{got:?}");
        assert!(got.contains(&t("update", "dobj", "plan")), "{got:?}");
        assert!(got.contains(&t("from", "pobj", "poi")), "{got:?}");
        assert!(got.contains(&t("far", "cop", "be")), "{got:?}");
    }

    #[test]
    fn passive_obligation() {
        let g = shallow_parse(
            "The information regarding the availability of the parking slots has to be exchanged with the appropriate e-cars.",
        )
        .unwrap();
        let got = triples(&g, &["nsubj", "nsubjpass", "pobj"]);
        assert!(got.contains(&t("have", "nsubjpass", "information")), "{got:?}");
        assert!(got.contains(&t("with", "pobj", "e-car")), "{got:?}");
    }

    #[test]
    fn relative_clause_and_coordination() {
        let g = shallow_parse("Cars have a plan to follow, which is based on its energy level and on the available slots.").unwrap();
        let got = triples(&g, &["nsubjpass", "rcmod", "conj", "pobj", "vmod"]);
        assert!(got.contains(&t("base", "nsubjpass", "which")), "{got:?}");
        assert!(got.contains(&t("plan", "rcmod", "base")), "{got:?}");
        assert!(got.contains(&t("on", "conj", "on")), "{got:?}");
        assert!(got.contains(&t("plan", "vmod", "follow")), "{got:?}");
    }

    #[test]
    fn offsets_come_from_pieces() {
        let parser = ShallowParser::bundled();
        let g = parser
            .parse_segments("x", SectionKind::General, &[(100, "every car needs to"), (200, "Continuously monitor its position;")])
            .unwrap();
        assert_eq!(g.tokens[0].char_span, (100, 105));
        assert_eq!(g.tokens[4].char_span, (200, 212));
        assert!(triples(&g, &["dobj"]).contains(&t("monitor", "dobj", "position")));
    }
}
