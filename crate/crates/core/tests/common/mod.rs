#![allow(dead_code)]

use std::path::PathBuf;

use irm_core::flow::DecisionJournal;
use irm_core::pipeline::{run, PipelineInput, RunConfig, RunOutcome, Stage};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn document() -> PipelineInput {
    PipelineInput::new(fixture("ecnp.txt"))
}

pub fn gold_journal() -> DecisionJournal {
    DecisionJournal::parse_jsonl(&fixture("gold_journal.jsonl")).expect("gold journal parses")
}

/// Full run of the fixture under the gold journal.
pub fn gold_run(until: Stage) -> RunOutcome {
    run(&document(), &gold_journal(), &RunConfig::default(), until).expect("gold run succeeds")
}
