//! Whitespace-and-punctuation tokenizer with byte offsets.

const ABBREVIATIONS: &[&str] = &["e.g.", "i.e.", "etc.", "vs.", "cf.", "approx."];
const LEADING: &[char] = &['(', '[', '"', '\''];
const TRAILING: &[char] = &[')', ']', ',', ';', ':', '.', '!', '?', '"', '\''];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

/// Tokenizes each `(offset, text)` piece; offsets of the result are
/// absolute (piece offset plus position inside the piece).
pub fn tokenize(pieces: &[(usize, &str)]) -> Vec<RawToken> {
    let mut out = Vec::new();
    for &(base, text) in pieces {
        let mut pos = 0;
        for word in text.split_whitespace() {
            let start = pos + text[pos..].find(word).expect("word comes from the same text");
            pos = start + word.len();
            split_word(word, base + start, &mut out);
        }
    }
    out
}

fn split_word(word: &str, offset: usize, out: &mut Vec<RawToken>) {
    let mut lo = 0;
    let mut hi = word.len();

    while lo < hi && word[lo..hi].starts_with(LEADING) {
        out.push(raw(&word[lo..lo + 1], offset + lo));
        lo += 1;
    }

    let mut trailing = Vec::new();
    while lo < hi {
        let body = &word[lo..hi];
        if ABBREVIATIONS.iter().any(|a| body.eq_ignore_ascii_case(a)) {
            break;
        }
        match body.chars().last() {
            Some(c) if TRAILING.contains(&c) => {
                hi -= c.len_utf8();
                trailing.push(raw(&word[hi..hi + c.len_utf8()], offset + hi));
            }
            _ => break,
        }
    }

    if lo < hi {
        let body = &word[lo..hi];
        // "5km", "0%": split a leading number from its unit.
        let digits =
            body.char_indices().take_while(|(_, c)| c.is_ascii_digit() || *c == '.').last().map(|(i, c)| i + c.len_utf8()).unwrap_or(0);
        if digits > 0 && digits < body.len() && body.as_bytes()[0].is_ascii_digit() {
            let unit = &body[digits..];
            if unit.chars().all(|c| c.is_alphabetic() || c == '%') {
                out.push(raw(&body[..digits], offset + lo));
                out.push(raw(unit, offset + lo + digits));
            } else {
                out.push(raw(body, offset + lo));
            }
        } else {
            out.push(raw(body, offset + lo));
        }
    }
    out.extend(trailing.into_iter().rev());
}

fn raw(s: &str, start: usize) -> RawToken {
    RawToken { surface: s.to_string(), start, end: start + s.len() }
}

/// Finds the byte span of each form, in order, within the pieces. Whitespace
/// between forms is skipped; anything else must match literally.
pub(crate) fn align<'a>(pieces: &[(usize, &str)], forms: impl Iterator<Item = &'a str>) -> Option<Vec<(usize, usize)>> {
    let mut spans = Vec::new();
    let mut piece = 0;
    let mut pos = 0;
    for form in forms {
        loop {
            let (base, text) = *pieces.get(piece)?;
            let rest = &text[pos..];
            let skipped = rest.len() - rest.trim_start().len();
            let rest = &rest[skipped..];
            if rest.is_empty() {
                piece += 1;
                pos = 0;
                continue;
            }
            if !rest.starts_with(form) {
                return None;
            }
            let start = pos + skipped;
            spans.push((base + start, base + start + form.len()));
            pos = start + form.len();
            break;
        }
    }
    Some(spans)
}
