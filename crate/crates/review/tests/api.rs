use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

use irm_core::flow::{DecisionJournal, DecisionKind};
use irm_core::pipeline::{refresh, PipelineInput, RunConfig, Stage, StateDir};
use irm_review::{router, ReviewService};

const CAR: &str = "alias_merge/car|e-car";

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

struct Session {
    _tmp: TempDir,
    dir: StateDir,
    app: Router,
}

impl Session {
    /// A state directory run to validation with `journal`, as `irm run` leaves it.
    fn new(journal: DecisionJournal) -> Self {
        let tmp = TempDir::new().unwrap();
        let dir = StateDir::new(tmp.path().join(".irm"));
        let path = dir.default_journal();
        let input = PipelineInput::new(fixture("ecnp.txt"));
        let (state, _) = refresh(None, input, RunConfig::default(), path.clone(), &journal, Stage::Validate, false).unwrap();
        dir.write_journal(&path, &journal).unwrap();
        dir.save(&state).unwrap();
        let app = router(Arc::new(ReviewService::new().with_session("s", dir.clone())));
        Session { _tmp: tmp, dir, app }
    }

    fn journal_text(&self) -> String {
        std::fs::read_to_string(self.dir.default_journal()).unwrap_or_default()
    }

    async fn send(&self, req: Request<Body>) -> (StatusCode, Value) {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let body = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).expect("JSON body") };
        (status, body)
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        self.send(Request::get(path).body(Body::empty()).unwrap()).await
    }

    async fn post_raw(&self, did: &str, body: String) -> (StatusCode, Value) {
        let req = Request::post(format!("/api/sessions/s/decisions/{did}"))
            .header("content-type", "application/json")
            .body(Body::from(body))
            .unwrap();
        self.send(req).await
    }

    async fn decide(&self, did: &str, choice: &str, revision: u64) -> (StatusCode, Value) {
        let body = json!({ "choice": choice, "author": "reviewer", "expected_revision": revision });
        self.post_raw(did, body.to_string()).await
    }
}

/// Percent-encodes everything but unreserved characters and `/`.
fn encode(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' | b'/' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

fn gold_journal() -> DecisionJournal {
    DecisionJournal::parse_jsonl(&fixture("gold_journal.jsonl")).unwrap()
}

#[tokio::test]
async fn fresh_session_reports_pending_state() {
    let s = Session::new(DecisionJournal::new());
    let (status, body) = s.get("/api/sessions").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "sessions": ["s"] }));

    let (status, state) = s.get("/api/sessions/s/state").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["revision"], 1);
    assert_eq!(state["stopped_at"], "flow");
    assert_eq!(state["components"], 3);
    assert_eq!(state["journal_entries"], 0);
    assert!(state["blocking_requests"].as_u64().unwrap() > 0);
    assert_eq!(state["verdict"], Value::Null);

    let (_, rev) = s.get("/api/sessions/s/revision").await;
    assert_eq!(rev, json!({ "revision": 1 }));
}

#[tokio::test]
async fn car_merge_is_listed_with_string_distance_evidence() {
    let s = Session::new(DecisionJournal::new());
    let (status, view) = s.get("/api/sessions/s/decisions").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["answered"], json!([]));
    let open = view["open"].as_array().unwrap();
    let car = open.iter().find(|r| r["id"] == CAR).expect("car/e-car request listed");
    assert_eq!(car["kind"], "alias_merge");
    assert_eq!(car["suggested"], "accept");
    let evidence = car["evidence"].as_array().unwrap();
    let distance = evidence.iter().find(|e| e["kind"] == "string_distance").expect("string_distance evidence");
    let score = distance["score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&score));
}

#[tokio::test]
async fn confirming_the_car_merge_leaves_two_components() {
    let s = Session::new(DecisionJournal::new());
    let (status, out) = s.decide(CAR, "accept", 1).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["entry"]["choice"], "accept");
    assert_eq!(out["entry"]["author"], "reviewer");
    assert_eq!(out["state"]["revision"], 2);
    assert_eq!(out["state"]["components"], 2);
    assert_eq!(out["state"]["journal_entries"], 1);

    // The response carries the pending list of the new revision.
    let (_, view) = s.get("/api/sessions/s/decisions").await;
    assert_eq!(view["revision"], 2);
    assert_eq!(out["pending"], view["open"]);
    assert!(out["pending"].as_array().unwrap().iter().all(|r| r["id"] != CAR));
    assert_eq!(view["answered"].as_array().unwrap().len(), 1);

    // The journal on disk is the record.
    let on_disk = DecisionJournal::parse_jsonl(&s.journal_text()).unwrap();
    assert_eq!(on_disk.choice(DecisionKind::AliasMerge, "car|e-car"), Some("accept"));
}

#[tokio::test]
async fn stale_revision_is_rejected_without_writing() {
    let s = Session::new(DecisionJournal::new());
    assert_eq!(s.decide(CAR, "accept", 1).await.0, StatusCode::OK);
    let before = s.journal_text();

    let (status, body) = s.decide(CAR, "reject", 1).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "revision_conflict");
    assert_eq!(body["revision"], 2);
    assert_eq!(s.journal_text(), before);
    assert_eq!(s.get("/api/sessions/s/revision").await.1["revision"], 2);
}

#[tokio::test]
async fn revert_supersedes_the_earlier_answer() {
    let s = Session::new(DecisionJournal::new());
    assert_eq!(s.decide(CAR, "accept", 1).await.0, StatusCode::OK);
    let (status, out) = s.decide(CAR, "reject", 2).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["state"]["revision"], 3);
    assert_eq!(out["state"]["components"], 3);

    // Both entries stay in the journal; only the newer one is in effect.
    let on_disk = DecisionJournal::parse_jsonl(&s.journal_text()).unwrap();
    assert_eq!(on_disk.len(), 2);
    let (_, view) = s.get("/api/sessions/s/decisions").await;
    let answered = view["answered"].as_array().unwrap();
    assert_eq!(answered.len(), 1);
    assert_eq!(answered[0]["choice"], "reject");
    assert_eq!(answered[0]["decision_id"], on_disk.entries()[1].decision_id.as_str());
    assert!(on_disk.entries()[1].timestamp > on_disk.entries()[0].timestamp);
}

#[tokio::test]
async fn percent_encoded_decision_ids_are_accepted() {
    let s = Session::new(DecisionJournal::new());
    let (status, out) = s.decide("alias_merge/car%7Ce-car", "accept", 1).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["state"]["components"], 2);
}

#[tokio::test]
async fn bad_requests_are_rejected_without_writing() {
    let s = Session::new(DecisionJournal::new());

    let (status, body) = s.decide("alias_merge/no|such", "accept", 1).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_decision")));
    let (status, _) = s.decide("not-a-request", "accept", 1).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // Unasked answers must name things the session knows about.
    assert_eq!(s.decide(&encode("direction/1(a)@Nope::x"), "out", 1).await.0, StatusCode::NOT_FOUND);
    assert_eq!(s.decide(&encode("direction/9(z)@E-Car::?"), "out", 1).await.0, StatusCode::NOT_FOUND);
    assert_eq!(s.decide(&encode("composition/system_output:7"), "accept", 1).await.0, StatusCode::NOT_FOUND);
    assert_eq!(s.decide(&encode("direction/1(c)@E-Car::?"), "sideways", 1).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = s.decide(CAR, "maybe", 1).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("bad_choice")));

    let body = json!({ "choice": "accept", "author": "  ", "expected_revision": 1 }).to_string();
    let (status, body) = s.post_raw(CAR, body).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("bad_request")));

    let body = json!({ "choice": "accept", "author": "a", "expected_revision": 1, "extra": 1 }).to_string();
    assert_eq!(s.post_raw(CAR, body).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(s.post_raw(CAR, "not json".into()).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = s.get("/api/sessions/nope/state").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));

    assert_eq!(s.journal_text(), "");
    assert_eq!(s.get("/api/sessions/s/revision").await.1["revision"], 1);
}

#[tokio::test]
async fn model_and_report_wait_for_blocking_decisions() {
    let s = Session::new(DecisionJournal::new());
    for path in ["/api/sessions/s/model", "/api/sessions/s/report"] {
        let (status, body) = s.get(path).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(body["error"], "not_available");
    }
}

#[tokio::test]
async fn gold_session_serves_the_golden_model_and_report() {
    let s = Session::new(gold_journal());
    let (_, state) = s.get("/api/sessions/s/state").await;
    assert_eq!(state["verdict"], "pass");
    assert_eq!(state["components"], 2);

    let resp = s.app.clone().oneshot(Request::get("/api/sessions/s/report").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "application/json");
    let text = String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    assert_eq!(text, fixture("gold_report.json"));

    let resp = s.app.clone().oneshot(Request::get("/api/sessions/s/model").body(Body::empty()).unwrap()).await.unwrap();
    let text = String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    assert_eq!(text, fixture("gold_model.json"));
}

#[tokio::test]
async fn journal_is_the_source_of_truth_after_a_crash() {
    let s = Session::new(DecisionJournal::new());
    // Simulate a writer that appended to the journal and died before
    // saving the state.
    let mut journal = DecisionJournal::new();
    journal.append(DecisionKind::AliasMerge, "car|e-car", "accept", "someone", "2024-01-01T00:00:00Z").unwrap();
    std::fs::write(s.dir.default_journal(), journal.to_jsonl()).unwrap();

    let (_, state) = s.get("/api/sessions/s/state").await;
    assert_eq!(state["revision"], 2);
    assert_eq!(state["components"], 2);
    assert_eq!(state["journal_entries"], 1);
    // The recomputed state was saved; reading again changes nothing.
    assert_eq!(s.get("/api/sessions/s/revision").await.1["revision"], 2);
    assert_eq!(s.dir.load().unwrap().unwrap().revision, 2);

    // Writers must now name the recomputed revision.
    assert_eq!(s.decide(CAR, "reject", 1).await.0, StatusCode::CONFLICT);
    assert_eq!(s.decide(CAR, "reject", 2).await.0, StatusCode::OK);
}

#[tokio::test]
async fn answering_every_suggestion_reaches_a_passing_report() {
    let s = Session::new(DecisionJournal::new());
    // Walk the gold journal through the API, one decision at a time.
    let mut revision = 1;
    for e in gold_journal().entries() {
        let did = encode(&format!("{}/{}", e.kind, e.target));
        let (status, out) = s.decide(&did, &e.choice, revision).await;
        assert_eq!(status, StatusCode::OK, "{did}: {out}");
        revision = out["state"]["revision"].as_u64().unwrap();
    }
    let (_, state) = s.get("/api/sessions/s/state").await;
    assert_eq!(state["verdict"], "pass");
    assert_eq!(state["stopped_at"], Value::Null);
}
