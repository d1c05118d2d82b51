//! REST API over pipeline state directories.
//!
//! Each session is one state directory. Reads go straight to disk so the
//! service and the command line never disagree; answering a decision
//! appends to the session journal, reruns the pipeline and bumps the
//! revision. Writers must name the revision they looked at, so two
//! reviewers cannot overwrite each other silently.
//!
//! | method | path                                   |
//! |--------|----------------------------------------|
//! | GET    | `/api/sessions`                        |
//! | GET    | `/api/sessions/{id}/state`             |
//! | GET    | `/api/sessions/{id}/revision`          |
//! | GET    | `/api/sessions/{id}/decisions`         |
//! | POST   | `/api/sessions/{id}/decisions/{did}`   |
//! | GET    | `/api/sessions/{id}/model`             |
//! | GET    | `/api/sessions/{id}/report`            |

use std::collections::BTreeMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use irm_core::flow::{
    parse_direction_target, parse_request_id, request_id, DecisionJournal, DecisionKind, DecisionRequest, FlowError, JournalEntry,
};
use irm_core::model::serialize;
use irm_core::pipeline::{refresh, PipelineError, PipelineState, Stage, StateDir, StateError};
use irm_core::validate::Verdict;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("no session `{0}`")]
    UnknownSession(String),
    #[error("no decision `{0}` in this session")]
    UnknownDecision(String),
    #[error("revision {expected} is stale; the session is at revision {current}")]
    RevisionConflict { expected: u64, current: u64 },
    #[error("`{choice}` is not a valid answer for `{decision}`")]
    BadChoice { decision: String, choice: String },
    #[error("{0}")]
    BadRequest(String),
    #[error("session has no {what} yet: {reason}")]
    NotAvailable { what: &'static str, reason: String },
    #[error("session `{0}` has not been run yet")]
    NotInitialized(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Journal(#[from] FlowError),
}

impl ReviewError {
    fn status(&self) -> StatusCode {
        match self {
            ReviewError::UnknownSession(_) | ReviewError::UnknownDecision(_) | ReviewError::NotInitialized(_) => StatusCode::NOT_FOUND,
            ReviewError::NotAvailable { .. } => StatusCode::NOT_FOUND,
            ReviewError::RevisionConflict { .. } => StatusCode::CONFLICT,
            ReviewError::BadChoice { .. } | ReviewError::BadRequest(_) | ReviewError::Journal(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::State(StateError::Locked(_)) => StatusCode::LOCKED,
            ReviewError::Pipeline(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::State(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ReviewError::UnknownSession(_) => "unknown_session",
            ReviewError::UnknownDecision(_) => "unknown_decision",
            ReviewError::RevisionConflict { .. } => "revision_conflict",
            ReviewError::BadChoice { .. } => "bad_choice",
            ReviewError::BadRequest(_) => "bad_request",
            ReviewError::NotAvailable { .. } => "not_available",
            ReviewError::NotInitialized(_) => "not_initialized",
            ReviewError::State(StateError::Locked(_)) => "locked",
            ReviewError::State(_) => "state_error",
            ReviewError::Pipeline(_) => "pipeline_error",
            ReviewError::Journal(_) => "journal_error",
        }
    }
}

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let ReviewError::RevisionConflict { current, .. } = &self {
            body["revision"] = json!(current);
        }
        (self.status(), Json(body)).into_response()
    }
}

/// Body of `POST …/decisions/{did}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionBody {
    pub choice: String,
    pub author: String,
    pub expected_revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub session: String,
    pub revision: u64,
    pub reached: Stage,
    pub stopped_at: Option<Stage>,
    pub open_requests: usize,
    pub blocking_requests: usize,
    pub journal_entries: usize,
    /// Components in the current catalog, once extraction ran.
    pub components: Option<usize>,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionsView {
    pub revision: u64,
    pub open: Vec<DecisionRequest>,
    /// Effective journal entries, oldest first.
    pub answered: Vec<JournalEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub entry: JournalEntry,
    pub state: StateSummary,
    /// Open requests of the new revision.
    pub pending: Vec<DecisionRequest>,
}

/// Sessions by id. Writes are serialized by one mutex and, across
/// processes, by the state directory lock.
#[derive(Debug, Default)]
pub struct ReviewService {
    sessions: BTreeMap<String, StateDir>,
    write: Mutex<()>,
}

impl ReviewService {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_session(mut self, id: impl Into<String>, dir: StateDir) -> Self {
        self.sessions.insert(id.into(), dir);
        self
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.keys().cloned().collect()
    }

    fn dir(&self, id: &str) -> Result<&StateDir, ReviewError> {
        self.sessions.get(id).ok_or_else(|| ReviewError::UnknownSession(id.to_string()))
    }

    fn load(&self, id: &str) -> Result<PipelineState, ReviewError> {
        self.dir(id)?.load()?.ok_or_else(|| ReviewError::NotInitialized(id.to_string()))
    }

    /// The stored state, recomputed first if the journal moved on since it
    /// was written (for instance after a crash between journal append and
    /// state save, or an edit by another tool).
    fn current(&self, id: &str) -> Result<(PipelineState, DecisionJournal), ReviewError> {
        let dir = self.dir(id)?;
        let state = self.load(id)?;
        let journal = dir.read_journal(&state.journal_path)?;
        if state.journal_sha256 == journal.sha256() {
            return Ok((state, journal));
        }
        let _guard = self.write.lock().unwrap_or_else(|e| e.into_inner());
        let _lock = dir.lock()?;
        let state = self.load(id)?;
        let journal = dir.read_journal(&state.journal_path)?;
        if state.journal_sha256 == journal.sha256() {
            return Ok((state, journal));
        }
        let next = rerun(&state, &journal)?;
        dir.save(&next)?;
        log::info!("session {id}: journal changed on disk, now at revision {}", next.revision);
        Ok((next, journal))
    }

    pub fn state(&self, id: &str) -> Result<StateSummary, ReviewError> {
        let (state, journal) = self.current(id)?;
        Ok(summary(id, &state, journal.len()))
    }

    pub fn revision(&self, id: &str) -> Result<u64, ReviewError> {
        Ok(self.current(id)?.0.revision)
    }

    pub fn decisions(&self, id: &str) -> Result<DecisionsView, ReviewError> {
        let (state, journal) = self.current(id)?;
        let mut answered: Vec<JournalEntry> = journal.effective().into_values().cloned().collect();
        answered.sort_by_key(|e| journal.entries().iter().position(|x| x.decision_id == e.decision_id));
        Ok(DecisionsView { revision: state.revision, open: state.outcome.requests, answered })
    }

    /// Canonical model document.
    pub fn model(&self, id: &str) -> Result<String, ReviewError> {
        let (state, _) = self.current(id)?;
        match &state.outcome.model {
            Some(model) => Ok(serialize(model)),
            None => Err(ReviewError::NotAvailable { what: "model", reason: pending_reason(&state) }),
        }
    }

    pub fn report(&self, id: &str) -> Result<String, ReviewError> {
        let (state, _) = self.current(id)?;
        match &state.outcome.report {
            Some(report) => Ok(report.to_json()),
            None => Err(ReviewError::NotAvailable { what: "validation report", reason: pending_reason(&state) }),
        }
    }

    /// Records an answer and reruns the pipeline. `did` is a request id
    /// (`<kind>/<target>`); it must be open, already answered, or one the
    /// designer may give unasked.
    ///
    /// The new outcome is computed before anything is written, so an answer
    /// the pipeline rejects never reaches the journal. The journal is then
    /// written before the state: if the process dies in between, the next
    /// read notices the journal hash changed and recomputes.
    pub fn decide(&self, id: &str, did: &str, body: DecisionBody) -> Result<DecisionOutcome, ReviewError> {
        let dir = self.dir(id)?;
        let (state, mut journal) = self.current(id)?;
        let _guard = self.write.lock().unwrap_or_else(|e| e.into_inner());
        let _lock = dir.lock()?;
        // Another writer may have got in between; the check below is
        // against the state on disk now.
        let state = match self.load(id)? {
            now if now.revision == state.revision => state,
            now => {
                journal = dir.read_journal(&now.journal_path)?;
                now
            }
        };
        if body.expected_revision != state.revision {
            return Err(ReviewError::RevisionConflict { expected: body.expected_revision, current: state.revision });
        }
        let (kind, target) = parse_request_id(did).ok_or_else(|| ReviewError::UnknownDecision(did.to_string()))?;
        let open = state.outcome.requests.iter().find(|r| r.id == did);
        let extra = unsolicited(&state, kind, target);
        if open.is_none() && extra.is_none() && journal.latest(kind, target).is_none() {
            return Err(ReviewError::UnknownDecision(did.to_string()));
        }
        let choice = body.choice.trim();
        let valid = match (open, extra) {
            (Some(r), _) => r.options.is_empty() || r.options.iter().any(|o| o == choice),
            (None, Some(allowed)) => allowed.contains(&choice),
            // Re-answering: the rerun below rejects choices the stage cannot use.
            (None, None) => true,
        };
        if choice.is_empty() || !valid {
            return Err(ReviewError::BadChoice { decision: did.to_string(), choice: body.choice });
        }
        let author = body.author.trim();
        if author.is_empty() {
            return Err(ReviewError::BadRequest("author must not be empty".into()));
        }
        let timestamp = next_timestamp(&journal);
        let entry = journal.append(kind, target, choice, author, timestamp)?.clone();
        let next = rerun(&state, &journal)?;
        dir.write_journal(&state.journal_path, &journal)?;
        dir.save(&next)?;
        log::info!("session {id}: {} = {} by {} (revision {})", request_id(kind, target), entry.choice, entry.author, next.revision);
        Ok(DecisionOutcome { entry, state: summary(id, &next, journal.len()), pending: next.outcome.requests.clone() })
    }
}

/// Answers the designer may give without being asked, with their allowed
/// choices: a direction for a parameter the signature does not have yet
/// (an attribute of a known component added to a known invariant), and
/// flagging an item's outputs as system outputs.
fn unsolicited(state: &PipelineState, kind: DecisionKind, target: &str) -> Option<&'static [&'static str]> {
    let outcome = &state.outcome;
    match kind {
        DecisionKind::Direction => {
            let (invariant, attr) = parse_direction_target(target)?;
            let known_invariant = outcome.signatures.iter().flatten().any(|s| s.invariant == invariant);
            let known_attr = outcome
                .catalog
                .iter()
                .flat_map(|c| &c.components)
                .any(|c| c.name == attr.component && (attr.is_placeholder() || c.attributes.iter().any(|a| a.key == attr.attribute)));
            (known_invariant && known_attr).then_some(&["in", "out", "undecided"])
        }
        DecisionKind::Composition => {
            let item = target.strip_prefix("system_output:")?;
            outcome.document.requirement_items.iter().any(|i| i.item_id == item).then_some(&["accept", "reject"])
        }
        _ => None,
    }
}

fn rerun(state: &PipelineState, journal: &DecisionJournal) -> Result<PipelineState, ReviewError> {
    let (next, _) =
        refresh(Some(state.clone()), state.input.clone(), state.config.clone(), state.journal_path.clone(), journal, state.until, true)?;
    Ok(next)
}

/// Now, in milliseconds, but strictly after the newest entry so that a
/// quick revert is never stamped with the instant of the answer it reverts.
fn next_timestamp(journal: &DecisionJournal) -> String {
    let now = chrono::Utc::now();
    let last = journal
        .entries()
        .iter()
        .filter_map(|e| chrono::DateTime::parse_from_rfc3339(&e.timestamp).ok())
        .map(|t| t.with_timezone(&chrono::Utc))
        .max();
    let at = match last {
        Some(last) if last >= now => last + chrono::Duration::milliseconds(1),
        _ => now,
    };
    at.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn summary(id: &str, state: &PipelineState, journal_entries: usize) -> StateSummary {
    let outcome = &state.outcome;
    StateSummary {
        session: id.to_string(),
        revision: state.revision,
        reached: outcome.reached,
        stopped_at: outcome.stopped_at,
        open_requests: outcome.requests.len(),
        blocking_requests: outcome.blocking().count(),
        journal_entries,
        components: outcome.catalog.as_ref().map(|c| c.components.len()),
        verdict: outcome.report.as_ref().map(|r| r.verdict),
    }
}

fn pending_reason(state: &PipelineState) -> String {
    match state.outcome.stopped_at {
        Some(stage) => format!("{} blocking decisions before {stage}", state.outcome.blocking().count()),
        None => format!("last run stopped after {}", state.outcome.reached),
    }
}

type Shared = Arc<ReviewService>;

fn raw_json(text: String) -> Response {
    ([(axum::http::header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn list_sessions(State(svc): State<Shared>) -> Json<Value> {
    Json(json!({ "sessions": svc.session_ids() }))
}

async fn get_state(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<StateSummary>, ReviewError> {
    svc.state(&id).map(Json)
}

async fn get_revision(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ReviewError> {
    Ok(Json(json!({ "revision": svc.revision(&id)? })))
}

async fn get_decisions(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<DecisionsView>, ReviewError> {
    svc.decisions(&id).map(Json)
}

async fn get_model(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    svc.model(&id).map(raw_json)
}

async fn get_report(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    svc.report(&id).map(raw_json)
}

async fn post_decision(
    State(svc): State<Shared>,
    Path((id, did)): Path<(String, String)>,
    body: Result<Json<DecisionBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<DecisionOutcome>, ReviewError> {
    let Json(body) = body.map_err(|e| ReviewError::BadRequest(e.body_text()))?;
    // Reruns the pipeline; keep it off the async workers.
    tokio::task::spawn_blocking(move || svc.decide(&id, &did, body))
        .await
        .map_err(|e| ReviewError::BadRequest(format!("decision task failed: {e}")))?
        .map(Json)
}

/// Routes of the service. Decision ids contain a `/`; clients may send it
/// raw or percent-encoded.
pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/api/sessions", get(list_sessions))
        .route("/api/sessions/{id}/state", get(get_state))
        .route("/api/sessions/{id}/revision", get(get_revision))
        .route("/api/sessions/{id}/decisions", get(get_decisions))
        .route("/api/sessions/{id}/decisions/{*did}", post(post_decision))
        .route("/api/sessions/{id}/model", get(get_model))
        .route("/api/sessions/{id}/report", get(get_report))
        .with_state(service)
}

/// Serves on the loopback interface only.
pub async fn serve(service: ReviewService, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(service))).await
}
