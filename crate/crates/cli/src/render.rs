//! Text and JSON output of the subcommands.

use std::fmt::Write;

use serde_json::{json, Value};

use irm_core::model::{canonical_json, serialize};
use irm_core::pipeline::{PipelineState, RunOutcome, Stage};

fn pretty(v: Value) -> String {
    canonical_json(&v).trim_end().to_string()
}

pub fn pending_json(state: &PipelineState) -> String {
    let o = &state.outcome;
    pretty(json!({
        "status": "pending",
        "revision": state.revision,
        "reached": o.reached,
        "stopped_at": o.stopped_at,
        "requests": json!(o.requests),
    }))
}

pub fn pending_text(o: &RunOutcome) -> String {
    let mut out = String::new();
    let blocking = o.blocking().count();
    let stage = o.stopped_at.map_or("-", |s| s.as_str());
    let _ = writeln!(out, "pending: {blocking} blocking decision(s) before {stage}");
    out.push_str(&requests_text(o));
    out.trim_end().to_string()
}

fn requests_text(o: &RunOutcome) -> String {
    let mut out = String::new();
    for r in &o.requests {
        let flag = if r.blocking { "*" } else { " " };
        let suggestion = if r.suggested.is_empty() { "(no suggestion)".to_string() } else { format!("suggest {}", r.suggested) };
        let evidence: Vec<&str> = r.evidence.iter().map(|e| e.kind.as_str()).collect();
        let _ = writeln!(out, "  {flag} {}  {suggestion}  [{}]", r.id, evidence.join(", "));
    }
    out
}

pub fn stage_json(stage: Stage, state: &PipelineState) -> String {
    let o = &state.outcome;
    let body = match stage {
        Stage::Segment => json!({ "document": json!(o.document), "unparsed": o.unparsed }),
        Stage::Extract => json!({ "catalog": json!(o.catalog), "dropped": json!(o.dropped) }),
        Stage::Classify => json!({ "classification": json!(o.classification) }),
        Stage::Flow => json!({ "signatures": json!(o.signatures) }),
        Stage::Compose => json!({
            "composition": json!(o.composition),
            "model": o.model.as_ref().map(|m| serde_json::from_str::<Value>(&serialize(m)).expect("model is JSON")),
        }),
        Stage::Validate => json!({ "report": json!(o.report) }),
    };
    let mut body = body;
    body["status"] = json!("ok");
    body["revision"] = json!(state.revision);
    body["requests"] = json!(o.requests);
    pretty(body)
}

pub fn stage_text(stage: Stage, o: &RunOutcome) -> String {
    let mut out = String::new();
    match stage {
        Stage::Segment => {
            let d = &o.document;
            let _ = writeln!(out, "{}", d.title);
            for s in &d.sections {
                let _ = writeln!(out, "section {}: {} sentence(s)", s.kind, s.sentences.len());
            }
            for i in &d.requirement_items {
                let _ = writeln!(out, "  item {:6} {:18} {}", i.item_id, i.section.to_string(), i.sentences.join(" "));
            }
            if !o.unparsed.is_empty() {
                let _ = writeln!(out, "unparsed: {}", o.unparsed.join(", "));
            }
        }
        Stage::Extract => {
            for c in o.catalog.iter().flat_map(|c| &c.components) {
                let attrs: Vec<String> = c.attributes.iter().map(|a| format!("{} ({})", a.key, a.name)).collect();
                let _ = writeln!(out, "{}: {}", c.name, attrs.join(", "));
            }
        }
        Stage::Classify => {
            for r in o.classification.iter().flat_map(|c| &c.requirements) {
                let ty = r.invariant_type.map(|t| t.to_string()).unwrap_or_else(|| "?".into());
                let mut line = format!("{:8} {:10} {:.4}", r.id, ty, r.confidence);
                if let Some(v) = &r.main_verb_lemma {
                    let _ = write!(line, "  verb={v}");
                }
                if let Some(c) = &r.condition {
                    let _ = write!(line, "  when {}", c.formula());
                }
                if let Some(t) = &r.timing {
                    let _ = write!(line, "  every {}s", t.period_seconds);
                }
                let _ = writeln!(out, "{}", line.trim_end());
            }
        }
        Stage::Flow => {
            for s in o.signatures.iter().flatten() {
                let _ = writeln!(out, "{:8} {s}", s.invariant);
            }
        }
        Stage::Compose => {
            for i in o.model.iter().flat_map(|m| &m.invariants) {
                let _ = writeln!(
                    out,
                    "I{:<3} {:10} {:44} {}",
                    i.id,
                    i.invariant_type.to_string(),
                    i.signature.to_string(),
                    i.description.replace('\n', " ")
                );
            }
            for d in o.model.iter().flat_map(|m| &m.decompositions) {
                let kids: Vec<String> = d.children.iter().map(|c| format!("I{c}")).collect();
                let _ = writeln!(out, "I{} = {}({})", d.parent, d.kind, kids.join(", "));
            }
        }
        Stage::Validate => {
            if let Some(r) = &o.report {
                out.push_str(&r.to_text());
            }
        }
    }
    if !o.requests.is_empty() {
        let _ = writeln!(out, "open requests ({}; * = blocking):", o.requests.len());
        out.push_str(&requests_text(o));
    }
    out.trim_end().to_string()
}

pub fn run_json(state: &PipelineState) -> String {
    let o = &state.outcome;
    pretty(json!({
        "status": if o.stopped_at.is_some() { "pending" } else { "ok" },
        "revision": state.revision,
        "reached": o.reached,
        "stopped_at": o.stopped_at,
        "requests": json!(o.requests),
        "assumed": json!(o.assumed),
        "report": json!(o.report),
    }))
}

pub fn run_text(state: &PipelineState) -> String {
    let o = &state.outcome;
    if o.stopped_at.is_some() {
        return pending_text(o);
    }
    let mut out = stage_text(Stage::Validate, o);
    if !o.assumed.is_empty() {
        let _ = write!(out, "\nassumed {} suggestion(s); the journal is unchanged", o.assumed.len());
    }
    out
}
