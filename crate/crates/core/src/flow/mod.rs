//! Knowledge flow: signatures, direction inference and the decision journal.

mod infer;
mod journal;
mod signature;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use infer::{collect_params, direction_target, infer_directions, parse_direction_target};
pub use journal::{parse_request_id, request_id, DecisionJournal, DecisionKind, DecisionRequest, Evidence, JournalEntry};
pub use signature::{format_signature, parse_signature, Basis, Direction, FlowSignature, KnowledgeParameter};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error("journal line {line}: {reason}")]
    MalformedJournal { line: usize, reason: String },
    #[error("decision id `{0}` appears twice in the journal")]
    DuplicateDecisionId(String),
    #[error("journal holds contradictory entries for `{0}`")]
    ConflictingDecisions(String),
    #[error("signature syntax error at {position}: {reason}")]
    SyntaxError { position: usize, reason: String },
    #[error("unknown name `{0}` in signature")]
    UnknownName(String),
    #[error("`{choice}` is not a valid answer for `{target}`")]
    BadChoice { target: String, choice: String },
}

/// How a stage treats questions the journal has not answered yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPolicy {
    /// Fail on the first unanswered question.
    Require,
    /// Take the suggested answer.
    AssumeDefaults,
    /// Leave the question open and report it.
    #[default]
    Defer,
}
