//! Runs the stages in order and stops where a designer has to answer.
//!
//! Every stage is a pure function of the document, the configuration and
//! the journal, so a run can always be repeated from scratch; [`state`]
//! only caches the last outcome, keyed by the hashes of those inputs.

pub mod state;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classify::{classify_all, Classification, ClassifyConfig, ClassifyError, SeedSets};
use crate::extract::{
    build_catalog, cluster_aliases, detect_appositions, extract_candidates, hint_kinds, AliasConfig, ComponentCatalog, DroppedCandidate,
    ExtractError,
};
use crate::flow::{
    collect_params, infer_directions, DecisionJournal, DecisionPolicy, DecisionRequest, FlowError, FlowSignature, JournalEntry,
};
use crate::lexicon::{LexiconError, Measure, SynsetGraph};
use crate::model::{assemble, canonical_json, compose, Composition, IrmModel, ModelError};
use crate::text::{segment_document, RequirementsDocument, ShallowParser, TextError};
use crate::validate::{validate, ValidateError, ValidationReport, DEFAULT_CAP};

pub use state::{refresh, PipelineState, RefreshError, StateDir, StateError, StateLock, JOURNAL_FILE, STATE_FILE};

/// Author recorded on answers taken from suggestions.
pub const ASSUMED_AUTHOR: &str = "assume-defaults";

/// Upper bound on suggestion rounds; each round answers at least one
/// request, and a document rarely needs more than a handful.
const MAX_ASSUME_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Segment,
    Extract,
    Classify,
    Flow,
    Compose,
    Validate,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Segment, Stage::Extract, Stage::Classify, Stage::Flow, Stage::Compose, Stage::Validate];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Segment => "segment",
            Stage::Extract => "extract",
            Stage::Classify => "classify",
            Stage::Flow => "flow",
            Stage::Compose => "compose",
            Stage::Validate => "validate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error("{stage} needs a designer decision for `{request}`")]
    Unresolved { stage: Stage, request: String },
}

/// Raw inputs of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineInput {
    pub document: String,
    /// Gold dependency parse; the bundled shallow parser is used without one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conllu: Option<String>,
}

impl PipelineInput {
    pub fn new(document: impl Into<String>) -> Self {
        PipelineInput { document: document.into(), conllu: None }
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&canonical_json(self))
    }
}

/// Tunables of a run. Lexicon and seed files are carried as text so they
/// take part in the configuration hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub policy: DecisionPolicy,
    /// Minimum string similarity for alias links.
    pub threshold: f64,
    pub measure: Measure,
    /// Largest number of configurations validation enumerates.
    pub cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            policy: DecisionPolicy::Defer,
            threshold: AliasConfig::default().threshold,
            measure: Measure::default(),
            cap: DEFAULT_CAP,
            lexicon: None,
            seeds: None,
        }
    }
}

impl RunConfig {
    pub fn sha256(&self) -> String {
        sha256_hex(&canonical_json(self))
    }

    fn classify_config(&self) -> Result<ClassifyConfig, PipelineError> {
        let mut config = ClassifyConfig { measure: self.measure, ..ClassifyConfig::default() };
        if let Some(text) = &self.lexicon {
            config.lexicon = SynsetGraph::parse(text)?;
        }
        if let Some(text) = &self.seeds {
            config.seeds = SeedSets::parse(text)?;
        }
        Ok(config)
    }
}

/// Everything a run produced, up to the stage it reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Last stage that finished.
    pub reached: Stage,
    /// Stage that could not start because of blocking requests.
    pub stopped_at: Option<Stage>,
    pub document: RequirementsDocument,
    /// Sentences the parser could not handle.
    pub unparsed: Vec<String>,
    pub catalog: Option<ComponentCatalog>,
    pub dropped: Vec<DroppedCandidate>,
    pub classification: Option<Classification>,
    pub signatures: Option<Vec<FlowSignature>>,
    pub composition: Option<Composition>,
    pub model: Option<IrmModel>,
    pub report: Option<ValidationReport>,
    /// Open decision requests of every stage that ran.
    pub requests: Vec<DecisionRequest>,
    /// Answers taken from suggestions; never written to the journal.
    pub assumed: Vec<JournalEntry>,
}

impl RunOutcome {
    pub fn blocking(&self) -> impl Iterator<Item = &DecisionRequest> {
        self.requests.iter().filter(|r| r.blocking)
    }

    pub fn is_pending(&self) -> bool {
        self.stopped_at.is_some()
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Runs the stages up to `until`. Under [`DecisionPolicy::AssumeDefaults`]
/// open requests are answered with their suggestions, round after round,
/// until nothing new comes up; the answers are reported in
/// [`RunOutcome::assumed`] and never touch `journal`.
pub fn run(input: &PipelineInput, journal: &DecisionJournal, config: &RunConfig, until: Stage) -> Result<RunOutcome, PipelineError> {
    if config.policy != DecisionPolicy::AssumeDefaults {
        return run_once(input, journal, config, until);
    }
    let deferring = RunConfig { policy: DecisionPolicy::Defer, ..config.clone() };
    let timestamp = journal.entries().last().map(|e| e.timestamp.clone()).unwrap_or_else(|| "1970-01-01T00:00:00Z".into());
    let mut combined = journal.clone();
    let mut assumed = Vec::new();
    for _ in 0..MAX_ASSUME_ROUNDS {
        let mut outcome = run_once(input, &combined, &deferring, until)?;
        let mut added = false;
        for r in &outcome.requests {
            if r.suggested.is_empty() || combined.latest(r.kind, &r.target).is_some() {
                continue;
            }
            let entry = combined.append(r.kind, &r.target, &r.suggested, ASSUMED_AUTHOR, &timestamp)?.clone();
            log::debug!("assuming {} = {}", r.id, entry.choice);
            assumed.push(entry);
            added = true;
        }
        if !added {
            outcome.assumed = assumed;
            return Ok(outcome);
        }
    }
    let mut outcome = run_once(input, &combined, &deferring, until)?;
    outcome.assumed = assumed;
    Ok(outcome)
}

fn gate(outcome: &mut RunOutcome, stage: Stage, config: &RunConfig, from: usize) -> Result<bool, PipelineError> {
    let Some(first) = outcome.requests[from..].iter().find(|r| r.blocking) else {
        outcome.reached = stage;
        return Ok(false);
    };
    if config.policy == DecisionPolicy::Require {
        return Err(PipelineError::Unresolved { stage, request: first.id.clone() });
    }
    outcome.stopped_at = Some(stage);
    Ok(true)
}

/// One pass without filling in suggestions; `AssumeDefaults` is treated
/// like `Defer`.
pub fn run_once(input: &PipelineInput, journal: &DecisionJournal, config: &RunConfig, until: Stage) -> Result<RunOutcome, PipelineError> {
    let mut document = segment_document(&input.document)?;
    let unparsed = match &input.conllu {
        Some(conllu) => {
            document.attach_conllu(conllu)?;
            document.sentences.iter().filter(|s| !document.graphs.contains_key(&s.id)).map(|s| s.id.clone()).collect()
        }
        None => document.parse_with(&ShallowParser::bundled()),
    };
    let mut outcome = RunOutcome {
        reached: Stage::Segment,
        stopped_at: None,
        document,
        unparsed,
        catalog: None,
        dropped: Vec::new(),
        classification: None,
        signatures: None,
        composition: None,
        model: None,
        report: None,
        requests: Vec::new(),
        assumed: Vec::new(),
    };
    if until == Stage::Segment {
        return Ok(outcome);
    }

    let doc = &outcome.document;
    let cands = hint_kinds(extract_candidates(doc), doc);
    let clusters = cluster_aliases(&cands, &detect_appositions(doc), &AliasConfig { threshold: config.threshold });
    let policy = if config.policy == DecisionPolicy::Require { DecisionPolicy::Require } else { DecisionPolicy::Defer };
    let build = build_catalog(doc, &cands, &clusters, journal, policy)?;
    let from = outcome.requests.len();
    outcome.requests.extend(build.requests);
    outcome.dropped = build.dropped;
    outcome.catalog = Some(build.catalog);
    if gate(&mut outcome, Stage::Extract, config, from)? || until == Stage::Extract {
        return Ok(outcome);
    }

    let catalog = outcome.catalog.clone().expect("set above");
    let classification = classify_all(&outcome.document, &catalog, &config.classify_config()?, journal)?;
    let from = outcome.requests.len();
    outcome.requests.extend(classification.requests.iter().cloned());
    outcome.classification = Some(classification);
    if gate(&mut outcome, Stage::Classify, config, from)? || until == Stage::Classify {
        return Ok(outcome);
    }

    let reqs = outcome.classification.as_ref().expect("set above").requirements.clone();
    let sigs: Vec<FlowSignature> = reqs.iter().map(|r| collect_params(r, &catalog)).collect();
    let (sigs, requests) = infer_directions(&sigs, journal)?;
    let from = outcome.requests.len();
    outcome.requests.extend(requests);
    outcome.signatures = Some(sigs);
    if gate(&mut outcome, Stage::Flow, config, from)? || until == Stage::Flow {
        return Ok(outcome);
    }

    let sigs = outcome.signatures.clone().expect("set above");
    let composition = compose(&reqs, &sigs, &outcome.document, journal)?;
    let from = outcome.requests.len();
    outcome.requests.extend(composition.requests.iter().cloned());
    outcome.composition = Some(composition);
    if gate(&mut outcome, Stage::Compose, config, from)? {
        return Ok(outcome);
    }
    let model = assemble(&reqs, &sigs, &outcome.document, &catalog, journal)?;
    outcome.model = Some(model);
    if until == Stage::Compose {
        return Ok(outcome);
    }

    let report = validate(outcome.model.as_ref().expect("set above"), config.cap)?;
    outcome.report = Some(report);
    outcome.reached = Stage::Validate;
    Ok(outcome)
}
