//! Line-oriented segmentation of requirements documents.
//!
//! Recognised headings: `Summary:`, `Requirements:`, a line starting with
//! `The general requirements` and a line mentioning `situation-specific
//! requirements`. Outline labels are `N.` for items and `(a)` for sub-items.

use std::collections::BTreeSet;

use super::{DocumentSentence, RequirementItem, RequirementsDocument, Section, SectionKind, TextError};

const ABBREVIATIONS: &[&str] = &["e.g.", "i.e.", "etc.", "vs.", "cf.", "approx."];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heading {
    Summary,
    Requirements,
    General,
    Situation,
}

fn heading(line: &str) -> Option<(Heading, usize)> {
    let lower = line.to_lowercase();
    if lower.starts_with("summary:") {
        return Some((Heading::Summary, "summary:".len()));
    }
    if lower.starts_with("requirements:") {
        return Some((Heading::Requirements, "requirements:".len()));
    }
    if lower.starts_with("the general requirements") {
        return Some((Heading::General, line.len()));
    }
    if lower.contains("situation-specific requirements") {
        return Some((Heading::Situation, line.len()));
    }
    None
}

enum Label {
    Item(String),
    Sub(char),
}

/// Returns the label and the byte length it occupies (including spacing).
fn outline_label(line: &str) -> Option<(Label, usize)> {
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 && line[digits..].starts_with('.') {
        let rest = &line[digits + 1..];
        if rest.is_empty() || rest.starts_with(char::is_whitespace) {
            let pad = rest.len() - rest.trim_start().len();
            return Some((Label::Item(line[..digits].to_string()), digits + 1 + pad));
        }
    }
    let mut chars = line.chars();
    if let (Some('('), Some(c), Some(')')) = (chars.next(), chars.next(), chars.next()) {
        if c.is_ascii_lowercase() {
            let rest = &line[3..];
            let pad = rest.len() - rest.trim_start().len();
            return Some((Label::Sub(c), 3 + pad));
        }
    }
    None
}

struct ItemDraft {
    item_id: String,
    section: SectionKind,
    parent: Option<String>,
    /// (start, end) byte ranges of the item's text lines.
    pieces: Vec<(usize, usize)>,
}

pub fn segment_document(raw: &str) -> Result<RequirementsDocument, TextError> {
    let mut title = String::new();
    let mut mode: Option<SectionKind> = None;
    let mut seen_heading = false;
    let mut prose: Vec<(SectionKind, usize, usize)> = Vec::new();
    let mut items: Vec<ItemDraft> = Vec::new();
    let mut current_top: Option<String> = None;
    let mut in_item = false;

    let mut offset = 0;
    for line_raw in raw.split_inclusive('\n') {
        let line_start = offset;
        offset += line_raw.len();
        let content = line_raw.trim_end_matches(['\n', '\r']);
        let lead = content.len() - content.trim_start().len();
        let line = content.trim();
        let start = line_start + lead;
        if line.is_empty() {
            in_item = false;
            continue;
        }
        if let Some((h, consumed)) = heading(line) {
            seen_heading = true;
            in_item = false;
            mode = Some(match h {
                Heading::Summary => SectionKind::Summary,
                Heading::Requirements | Heading::General => SectionKind::General,
                Heading::Situation => SectionKind::SituationSpecific,
            });
            let rest = &line[consumed..];
            let trimmed = rest.trim_start();
            if !trimmed.is_empty() {
                let s = start + consumed + (rest.len() - trimmed.len());
                prose.push((mode.unwrap(), s, s + trimmed.len()));
            }
            continue;
        }
        let Some(kind) = mode else {
            if title.is_empty() {
                title = line.to_string();
            }
            continue;
        };
        if kind != SectionKind::Summary {
            if let Some((label, consumed)) = outline_label(line) {
                let (item_id, parent) = match label {
                    Label::Item(n) => {
                        current_top = Some(n.clone());
                        (n, None)
                    }
                    Label::Sub(c) => match &current_top {
                        Some(top) => (format!("{top}({c})"), Some(top.clone())),
                        None => (format!("({c})"), None),
                    },
                };
                let body_start = start + consumed;
                let pieces = if body_start < start + line.len() { vec![(body_start, start + line.len())] } else { vec![] };
                items.push(ItemDraft { item_id, section: kind, parent, pieces });
                in_item = true;
                continue;
            }
            if in_item {
                items.last_mut().expect("in_item implies an item").pieces.push((start, start + line.len()));
                continue;
            }
        }
        prose.push((kind, start, start + line.len()));
    }

    if !seen_heading {
        return Err(TextError::MissingSection);
    }
    let mut ids = BTreeSet::new();
    for it in &items {
        if !ids.insert(it.item_id.clone()) {
            return Err(TextError::DuplicateItem(it.item_id.clone()));
        }
    }

    // Emit sentences in document order: prose blocks and items interleaved
    // by their start offset.
    enum Block<'a> {
        Prose(SectionKind, usize, usize),
        Item(&'a ItemDraft),
    }
    let mut blocks: Vec<(usize, Block)> = prose.iter().map(|&(k, s, e)| (s, Block::Prose(k, s, e))).collect();
    blocks.extend(items.iter().map(|it| (it.pieces.first().map_or(usize::MAX, |p| p.0), Block::Item(it))));
    blocks.sort_by_key(|(s, _)| *s);

    let mut sentences: Vec<DocumentSentence> = Vec::new();
    let mut item_sentences: Vec<(String, Vec<String>)> = Vec::new();
    let mut stems: Vec<(String, (usize, usize))> = Vec::new();
    let push = |section, item: Option<&str>, (s, e): (usize, usize), sentences: &mut Vec<DocumentSentence>| {
        let id = format!("s{}", sentences.len() + 1);
        sentences.push(DocumentSentence {
            id: id.clone(),
            text: raw[s..e].to_string(),
            span: (s, e),
            section,
            item: item.map(str::to_string),
            stem: None,
        });
        id
    };
    for (_, block) in &blocks {
        match block {
            Block::Prose(kind, s, e) => {
                for span in split_sentences(raw, *s, *e) {
                    push(*kind, None, span, &mut sentences);
                }
            }
            Block::Item(it) => {
                let mut ids = Vec::new();
                for &(s, e) in &it.pieces {
                    for span in split_sentences(raw, s, e) {
                        ids.push(push(it.section, Some(&it.item_id), span, &mut sentences));
                    }
                }
                if let Some(last) = ids.last().and_then(|id| sentences.iter().find(|x| &x.id == id)) {
                    if let Some(stem) = lead_in_stem(raw, last.span) {
                        stems.push((it.item_id.clone(), stem));
                    }
                }
                item_sentences.push((it.item_id.clone(), ids));
            }
        }
    }
    for s in &mut sentences {
        let parent = s.item.as_ref().and_then(|id| items.iter().find(|it| &it.item_id == id)).and_then(|it| it.parent.clone());
        if let Some(parent) = parent {
            s.stem = stems.iter().find(|(id, _)| *id == parent).map(|(_, span)| *span);
        }
    }

    let sections = [SectionKind::Summary, SectionKind::General, SectionKind::SituationSpecific]
        .into_iter()
        .map(|kind| Section { kind, sentences: sentences.iter().filter(|s| s.section == kind).map(|s| s.id.clone()).collect() })
        .collect();

    let requirement_items = items
        .iter()
        .enumerate()
        .map(|(order, it)| RequirementItem {
            item_id: it.item_id.clone(),
            order,
            section: it.section,
            parent: it.parent.clone(),
            children: items.iter().filter(|c| c.parent.as_deref() == Some(it.item_id.as_str())).map(|c| c.item_id.clone()).collect(),
            sentences: item_sentences.iter().find(|(id, _)| *id == it.item_id).map(|(_, s)| s.clone()).unwrap_or_default(),
        })
        .collect();

    Ok(RequirementsDocument { title, source: raw.to_string(), sections, sentences, requirement_items, graphs: Default::default() })
}

/// For a sentence ending in `:` ("In order to do that, every car needs
/// to:"), the clause after the last comma, without the colon.
fn lead_in_stem(raw: &str, (s, e): (usize, usize)) -> Option<(usize, usize)> {
    let text = &raw[s..e];
    let body = text.strip_suffix(':')?;
    let clause_start = body.rfind(", ").map_or(0, |i| i + 2);
    let clause = &body[clause_start..];
    let lead = clause.len() - clause.trim_start().len();
    let clause = clause.trim();
    if clause.is_empty() {
        return None;
    }
    let start = s + clause_start + lead;
    Some((start, start + clause.len()))
}

/// Splits `raw[start..end]` at sentence-final punctuation outside
/// parentheses that is followed by whitespace and an uppercase letter (or
/// the end of the range). Returned spans are trimmed.
pub(crate) fn split_sentences(raw: &str, start: usize, end: usize) -> Vec<(usize, usize)> {
    let text = &raw[start..end];
    let mut spans = Vec::new();
    let mut depth = 0i32;
    let mut sent_start = 0;
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    for (k, &(i, c)) in bytes.iter().enumerate() {
        match c {
            '(' => depth += 1,
            ')' => depth = (depth - 1).max(0),
            '.' | '!' | '?' if depth == 0 => {
                let word_start = text[..i].rfind(char::is_whitespace).map_or(0, |w| w + 1);
                let word = text[word_start..=i].to_lowercase();
                if ABBREVIATIONS.iter().any(|a| word.ends_with(a)) {
                    continue;
                }
                let after = &bytes[k + 1..];
                let boundary = match after.iter().position(|(_, ch)| !ch.is_whitespace()) {
                    None => true,
                    Some(p) => p > 0 && after[p].1.is_uppercase(),
                };
                if boundary {
                    let stop = i + c.len_utf8();
                    push_trimmed(text, start, sent_start, stop, &mut spans);
                    sent_start = stop;
                }
            }
            _ => {}
        }
    }
    push_trimmed(text, start, sent_start, text.len(), &mut spans);
    spans
}

fn push_trimmed(text: &str, base: usize, s: usize, e: usize, out: &mut Vec<(usize, usize)>) {
    let piece = &text[s..e];
    let lead = piece.len() - piece.trim_start().len();
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push((base + s + lead, base + s + lead + trimmed.len()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ECNP: &str = include_str!("../../../../fixtures/ecnp.txt");

    #[test]
    fn fixture_sections_and_items() {
        let doc = segment_document(ECNP).unwrap();
        assert_eq!(doc.title, "Electric Car Navigation and Parking (ECNP)");
        let ids = |kind| -> Vec<String> { doc.requirement_items.iter().filter(|i| i.section == kind).map(|i| i.item_id.clone()).collect() };
        assert_eq!(ids(SectionKind::General), ["1", "1(a)", "1(b)", "1(c)", "1(d)", "2", "3"]);
        assert_eq!(ids(SectionKind::SituationSpecific), ["4", "5"]);
        assert_eq!(doc.section(SectionKind::Summary).unwrap().sentences.len(), 2);
        assert_eq!(doc.item("1").unwrap().children, ["1(a)", "1(b)", "1(c)", "1(d)"]);
        assert_eq!(doc.item("1").unwrap().sentences.len(), 2);
    }

    #[test]
    fn sub_items_carry_parent_stem() {
        let doc = segment_document(ECNP).unwrap();
        let s = doc.sentences.iter().find(|s| s.item.as_deref() == Some("1(a)")).unwrap();
        assert_eq!(doc.parse_text(s), "every car needs to Continuously monitor its energy level (battery);");
        let top = doc.sentences.iter().find(|s| s.item.as_deref() == Some("2")).unwrap();
        assert_eq!(top.stem, None);
    }

    #[test]
    fn sections_partition_sentences() {
        let doc = segment_document(ECNP).unwrap();
        let ordered: Vec<&String> = doc.sections.iter().flat_map(|s| &s.sentences).collect();
        let all: Vec<&String> = doc.sentences.iter().map(|s| &s.id).collect();
        assert_eq!(ordered, all);
        for s in &doc.sentences {
            assert_eq!(&doc.source[s.span.0..s.span.1], s.text);
        }
    }

    #[test]
    fn summary_only_document() {
        let doc = segment_document("Title\n\nSummary:\nCars park.\n").unwrap();
        assert!(doc.section(SectionKind::General).unwrap().sentences.is_empty());
        assert!(doc.requirement_items.is_empty());
        assert_eq!(doc.sentences.len(), 1);
    }

    #[test]
    fn missing_heading() {
        assert_eq!(segment_document("just text\n1. Cars park.\n"), Err(TextError::MissingSection));
    }

    #[test]
    fn abbreviations_do_not_split() {
        let raw = "Cars park (e.g., here). Trucks wait. X";
        let spans = split_sentences(raw, 0, raw.len());
        assert_eq!(spans.len(), 3);
    }
}
