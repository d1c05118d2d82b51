//! CoNLL-U reading and writing.
//!
//! Only the columns ID, FORM, LEMMA, UPOS/XPOS, HEAD and DEPREL are used.
//! Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.

use std::fmt::Write as _;

use super::{DependencyEdge, SectionKind, SentenceGraph, TextError, Token};

struct Pending {
    id: Option<String>,
    text: Option<String>,
    start_line: usize,
    tokens: Vec<Token>,
    edges: Vec<DependencyEdge>,
}

impl Pending {
    fn new(line: usize) -> Self {
        Pending { id: None, text: None, start_line: line, tokens: Vec::new(), edges: Vec::new() }
    }

    fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn finish(self, ordinal: usize) -> Result<SentenceGraph, TextError> {
        let sentence_id = self.id.unwrap_or_else(|| format!("conllu-{ordinal}"));
        let mut tokens = self.tokens;
        // Offsets relative to the sentence text when it is given, otherwise
        // forms laid out with single spaces.
        let text = self.text.unwrap_or_else(|| tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "));
        let mut pos = 0;
        for t in &mut tokens {
            let start = text[pos..].find(&t.surface).map_or(pos, |i| pos + i);
            t.char_span = (start, start + t.surface.len());
            pos = t.char_span.1.min(text.len());
        }
        let graph = SentenceGraph { sentence_id, tokens, edges: self.edges, source_section: SectionKind::General };
        graph.check_tree().map_err(|e| match e {
            TextError::MalformedConllu { reason, .. } => TextError::MalformedConllu { line: self.start_line, reason },
            other => other,
        })?;
        Ok(graph)
    }
}

/// Parses CoNLL-U text into one graph per sentence. The section of each
/// graph defaults to `General`; [`super::RequirementsDocument::attach_conllu`]
/// fixes it up from the document.
pub fn ingest_conllu(text: &str) -> Result<Vec<SentenceGraph>, TextError> {
    let mut out = Vec::new();
    let mut cur = Pending::new(1);
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !cur.is_empty() {
                let done = std::mem::replace(&mut cur, Pending::new(line_no + 1));
                out.push(done.finish(out.len() + 1)?);
            } else {
                cur = Pending::new(line_no + 1);
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => cur.id = Some(value.trim().to_string()),
                    "text" => cur.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(TextError::MalformedConllu {
                line: line_no,
                reason: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| TextError::MalformedConllu { line: line_no, reason: format!("token id `{}` is not an integer", cols[0]) })?;
        let head: usize = cols[6]
            .parse()
            .map_err(|_| TextError::MalformedConllu { line: line_no, reason: format!("HEAD `{}` is not an integer", cols[6]) })?;
        let surface = cols[1].to_string();
        let lemma = match cols[2] {
            "_" => surface.to_lowercase(),
            l => l.to_lowercase(),
        };
        let pos = match (cols[4], cols[3]) {
            ("_", upos) => upos.to_string(),
            (xpos, _) => xpos.to_string(),
        };
        cur.tokens.push(Token { index, surface, lemma, pos, char_span: (0, 0) });
        cur.edges.push(DependencyEdge { head, dependent: index, relation: cols[7].to_lowercase() });
    }
    if !cur.is_empty() {
        out.push(cur.finish(out.len() + 1)?);
    }
    Ok(out)
}

/// Coarse universal tag for a Penn tag, written to the UPOS column.
fn upos(xpos: &str) -> &'static str {
    match xpos {
        p if p.starts_with("NNP") => "PROPN",
        p if p.starts_with("NN") => "NOUN",
        "MD" => "AUX",
        p if p.starts_with("VB") => "VERB",
        p if p.starts_with("JJ") => "ADJ",
        p if p.starts_with("RB") || p == "WRB" => "ADV",
        "PRP" | "PRP$" | "WP" | "WP$" => "PRON",
        "DT" | "PDT" | "WDT" => "DET",
        "IN" => "ADP",
        "TO" => "PART",
        "CC" => "CCONJ",
        "CD" => "NUM",
        "SYM" => "SYM",
        "FW" => "X",
        _ => "PUNCT",
    }
}

/// Writes graphs as CoNLL-U. `text` supplies the `# text` comment for each
/// sentence; when it returns `None` the forms are joined with spaces.
pub fn write_conllu<'a>(graphs: impl IntoIterator<Item = &'a SentenceGraph>, text: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::new();
    for g in graphs {
        let sentence_text =
            text(&g.sentence_id).unwrap_or_else(|| g.tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "));
        let _ = writeln!(out, "# sent_id = {}", g.sentence_id);
        let _ = writeln!(out, "# text = {sentence_text}");
        for t in &g.tokens {
            let (head, rel) = g.head_of(t.index).map_or((0, "dep"), |e| (e.head, e.relation.as_str()));
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t_\t{}\t{}\t_\t_", t.index, t.surface, t.lemma, upos(&t.pos), t.pos, head, rel);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;

    const MONITOR: &str = "# sent_id = monitor
# text = Every car needs to continuously monitor its energy level (battery).
1\tEvery\tevery\tDET\tDT\t_\t2\tdet\t_\t_
2\tcar\tcar\tNOUN\tNN\t_\t3\tnsubj\t_\t_
3\tneeds\tneed\tVERB\tVBZ\t_\t0\troot\t_\t_
4\tto\tto\tPART\tTO\t_\t6\taux\t_\t_
5\tcontinuously\tcontinuously\tADV\tRB\t_\t6\tadvmod\t_\t_
6\tmonitor\tmonitor\tVERB\tVB\t_\t3\txcomp\t_\t_
7\tits\tits\tPRON\tPRP$\t_\t9\tposs\t_\t_
8\tenergy\tenergy\tNOUN\tNN\t_\t9\tcompound\t_\t_
9\tlevel\tlevel\tNOUN\tNN\t_\t6\tdobj\t_\t_
10\t(\t(\tPUNCT\t-LRB-\t_\t11\tpunct\t_\t_
11\tbattery\tbattery\tNOUN\tNN\t_\t9\tappos\t_\t_
12\t)\t)\tPUNCT\t-RRB-\t_\t11\tpunct\t_\t_
13\t.\t.\tPUNCT\t.\t_\t3\tpunct\t_\t_
";

    fn triple(h: &str, r: &str, d: &str) -> (String, String, String) {
        (h.into(), r.into(), d.into())
    }

    #[test]
    fn monitor_sentence_triples() {
        let graphs = ingest_conllu(MONITOR).unwrap();
        assert_eq!(graphs.len(), 1);
        let g = &graphs[0];
        assert_eq!(g.sentence_id, "monitor");
        assert_eq!(g.root(), Some(3));
        let triples = g.role_triples(&["nsubj", "dobj", "appos"]);
        assert_eq!(
            triples,
            BTreeSet::from([triple("need", "nsubj", "car"), triple("monitor", "dobj", "level"), triple("level", "appos", "battery")])
        );
        assert_eq!(g.token(9).unwrap().char_span, (51, 56));
    }

    #[test]
    fn empty_input() {
        assert!(ingest_conllu("").unwrap().is_empty());
        assert!(ingest_conllu("\n\n# comment\n").unwrap().is_empty());
    }

    #[test]
    fn ranges_and_empty_nodes_are_skipped() {
        let text = "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdo\tdo\tAUX\tVBP\t_\t0\troot\t_\t_\n1.1\tx\tx\tX\tX\t_\t_\t_\t_\t_\n2\tn't\tnot\tPART\t_\t_\t1\tneg\t_\t_\n";
        let g = &ingest_conllu(text).unwrap()[0];
        assert_eq!(g.tokens.len(), 2);
        // UPOS fallback when XPOS is `_`.
        assert_eq!(g.tokens[1].pos, "PART");
    }

    #[test]
    fn malformed_lines() {
        let short = "1\tCars\tcar\tNOUN\tNNS\t_\t2\tnsubj\n";
        assert!(matches!(ingest_conllu(short), Err(TextError::MalformedConllu { line: 1, .. })));
        let bad_head = "1\tCars\tcar\tNOUN\tNNS\t_\tx\tnsubj\t_\t_\n";
        assert!(matches!(ingest_conllu(bad_head), Err(TextError::MalformedConllu { line: 1, .. })));
    }

    /// Independent tree check: exactly one root, every token reachable from
    /// it by DFS over child links, every token visited once.
    fn is_tree_by_dfs(heads: &[usize]) -> bool {
        let n = heads.len();
        let roots: Vec<usize> = (1..=n).filter(|&i| heads[i - 1] == 0).collect();
        if roots.len() != 1 {
            return false;
        }
        let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 1..=n {
            children.entry(heads[i - 1]).or_default().push(i);
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![roots[0]];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                return false;
            }
            stack.extend(children.get(&v).into_iter().flatten());
        }
        seen.len() == n
    }

    #[test]
    fn all_head_assignments_for_two_tokens() {
        let mut accepted = 0;
        for h1 in 0..=2 {
            for h2 in 0..=2 {
                let text = format!(
                    "# sent_id = v{h1}{h2}\n1\tCars\tcar\tNOUN\tNNS\t_\t{h1}\tdep\t_\t_\n2\tpark\tpark\tVERB\tVBP\t_\t{h2}\tdep\t_\t_\n"
                );
                let result = ingest_conllu(&text);
                let oracle = is_tree_by_dfs(&[h1, h2]);
                assert_eq!(result.is_ok(), oracle, "heads ({h1},{h2})");
                if oracle {
                    accepted += 1;
                }
                let cyclic = h1 == 1 || h2 == 2 || (h1 == 2 && h2 == 1);
                if cyclic {
                    assert_eq!(result, Err(TextError::CyclicParse(format!("v{h1}{h2}"))), "heads ({h1},{h2})");
                }
            }
        }
        // (0,1) and (2,0): exactly one tree shape per root choice.
        assert_eq!(accepted, 2);
    }

    #[test]
    fn write_then_read_round_trip() {
        let graphs = ingest_conllu(MONITOR).unwrap();
        let written = write_conllu(&graphs, |_| Some("Every car needs to continuously monitor its energy level (battery).".into()));
        assert_eq!(ingest_conllu(&written).unwrap(), graphs);
    }
}
