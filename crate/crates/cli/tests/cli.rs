use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

/// A scratch working directory with its own state directory.
struct Workdir {
    tmp: TempDir,
}

impl Workdir {
    fn new() -> Self {
        Workdir { tmp: TempDir::new().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.tmp.path().join(name)
    }

    fn state_dir(&self) -> PathBuf {
        self.path(".irm")
    }

    fn command(&self, args: &[&str]) -> Command {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_irm"));
        cmd.args(args).current_dir(self.tmp.path()).env("IRM_STATE_DIR", self.state_dir()).env_remove("RUST_LOG");
        cmd
    }

    fn irm(&self, args: &[&str]) -> Output {
        self.command(args).output().expect("irm runs")
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn golden_report() -> Value {
    serde_json::from_str(&fixture("gold_report.json")).unwrap()
}

fn doc() -> String {
    fixture_path("ecnp.txt").display().to_string()
}

fn journal() -> String {
    fixture_path("gold_journal.jsonl").display().to_string()
}

#[test]
fn run_without_journal_stops_at_flow() {
    let w = Workdir::new();
    let o = w.irm(&["run", "--in", &doc()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("pending: "), "{text}");
    assert!(text.lines().next().unwrap().ends_with("before flow"), "{text}");
    assert!(text.contains("* direction/"), "{text}");
    assert!(w.state_dir().join("irm-state.json").exists());

    let o = w.irm(&["--json", "run"]);
    assert_eq!(code(&o), 2);
    let v = json(&o);
    assert_eq!(v["status"], "pending");
    assert_eq!(v["stopped_at"], "flow");
    assert_eq!(v["reached"], "classify");
}

#[test]
fn flow_with_open_decisions_lists_them() {
    let w = Workdir::new();
    let o = w.irm(&["--json", "flow", "--in", &doc()]);
    assert_eq!(code(&o), 2);
    let v = json(&o);
    let requests = v["requests"].as_array().unwrap();
    assert!(requests.iter().any(|r| r["id"] == "alias_merge/car|e-car" && r["blocking"] == false));
    assert!(requests.iter().any(|r| r["kind"] == "direction" && r["blocking"] == true));

    // Earlier stages are not blocked.
    let o = w.irm(&["classify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("1 ") && l.contains("Abstract")), "{}", stdout(&o));
}

#[test]
fn missing_input_is_an_input_error() {
    let w = Workdir::new();
    let o = w.irm(&["extract", "--in", "missing.txt"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("missing.txt"), "{}", stderr(&o));

    // No document and no stored state.
    assert_eq!(code(&w.irm(&["extract"])), 4);
    // Out-of-range tunables.
    assert_eq!(code(&w.irm(&["extract", "--in", &doc(), "--threshold", "1.5"])), 4);
    assert_eq!(code(&w.irm(&["validate", "--in", &doc(), "--cap", "0"])), 4);
    // A malformed journal.
    std::fs::write(w.path("bad.jsonl"), "{not json}\n").unwrap();
    let o = w.irm(&["flow", "--in", &doc(), "--journal", "bad.jsonl"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("journal line 1"), "{}", stderr(&o));
}

#[test]
fn gold_journal_run_matches_the_golden_report() {
    let w = Workdir::new();
    let o = w.irm(&["run", "--in", &doc(), "--journal", &journal(), "--out", "report.json"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("pass"), "{}", stdout(&o));
    assert_eq!(std::fs::read_to_string(w.path("report.json")).unwrap(), fixture("gold_report.json"));

    let o = w.irm(&["--json", "validate"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["report"], golden_report());

    let o = w.irm(&["compose", "--out", "model.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(w.path("model.json")).unwrap(), fixture("gold_model.json"));
}

#[test]
fn conllu_input_gives_the_same_report() {
    let w = Workdir::new();
    let conllu = fixture_path("ecnp.conllu").display().to_string();
    let o = w.irm(&["--json", "validate", "--in", &doc(), "--conllu", &conllu, "--journal", &journal()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["report"], golden_report());
}

#[test]
fn rerunning_reuses_state_and_rebuilding_is_byte_identical() {
    let w = Workdir::new();
    let args = ["--json", "run", "--in", &doc(), "--journal", &journal(), "--out", "report.json"];
    let first = w.irm(&args);
    assert_eq!(code(&first), 0);
    let revision = json(&first)["revision"].clone();
    let report = std::fs::read(w.path("report.json")).unwrap();

    // Same inputs: the stored outcome is reused.
    let again = w.irm(&args);
    assert_eq!(json(&again)["revision"], revision);
    assert_eq!(stdout(&again), stdout(&first));

    // A forced rerun recomputes and bumps the revision.
    let mut forced = args.to_vec();
    forced.push("--force");
    let forced = w.irm(&forced);
    assert_eq!(json(&forced)["revision"], revision.as_u64().unwrap() + 1);

    // From scratch: identical output.
    std::fs::remove_dir_all(w.state_dir()).unwrap();
    std::fs::remove_file(w.path("report.json")).unwrap();
    let rebuilt = w.irm(&args);
    assert_eq!(stdout(&rebuilt), stdout(&first));
    assert_eq!(std::fs::read(w.path("report.json")).unwrap(), report);
}

#[test]
fn journal_changes_are_picked_up() {
    let w = Workdir::new();
    let own = w.path("journal.jsonl");
    let gold = fixture("gold_journal.jsonl");
    let partial: String = gold.lines().take(3).map(|l| format!("{l}\n")).collect();
    std::fs::write(&own, partial).unwrap();
    let own = own.display().to_string();
    assert_eq!(code(&w.irm(&["run", "--in", &doc(), "--journal", &own])), 2);
    std::fs::write(&own, gold).unwrap();
    // The journal path is remembered with the state.
    let o = w.irm(&["run"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn assume_defaults_without_journal_completes() {
    let w = Workdir::new();
    let o = w.irm(&["--json", "run", "--in", &doc(), "--assume-defaults"]);
    assert!(matches!(code(&o), 0 | 3), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["reached"], "validate");
    assert!(!v["assumed"].as_array().unwrap().is_empty());
    assert!(v["assumed"].as_array().unwrap().iter().all(|e| e["author"] == "assume-defaults"));
    // Suggestions are never written to the journal.
    assert!(!w.state_dir().join("journal.jsonl").exists());

    // With the gold journal nothing is left to assume.
    let o = w.irm(&["--json", "run", "--journal", &journal(), "--assume-defaults"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["assumed"], Value::Array(vec![]));
}

#[test]
fn model_files_are_validated_directly() {
    let w = Workdir::new();
    let cases = [
        ("gold_model.json", 0, None),
        ("defects/missing_producer.json", 3, Some("MissingInput")),
        ("defects/multiple_writers.json", 3, Some("MultipleWriters")),
        ("defects/orphan_attribute.json", 0, Some("UnusedAttribute")),
    ];
    for (file, exit, kind) in cases {
        let path = fixture_path(file).display().to_string();
        let o = w.irm(&["--json", "validate", "--model", &path]);
        assert_eq!(code(&o), exit, "{file}: {}", stderr(&o));
        let kinds: Vec<String> = json(&o)["findings"].as_array().unwrap().iter().map(|f| f["kind"].as_str().unwrap().to_string()).collect();
        match kind {
            None => assert!(kinds.is_empty(), "{file}: {kinds:?}"),
            Some(k) => assert!(!kinds.is_empty() && kinds.iter().all(|x| x == k), "{file}: {kinds:?}"),
        }
        let text = w.irm(&["validate", "--model", &path]);
        assert_eq!(code(&text), exit);
    }
    // Capped enumeration is a validation failure.
    let gold = fixture_path("gold_model.json").display().to_string();
    let o = w.irm(&["validate", "--model", &gold, "--cap", "1"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("configurations"), "{}", stderr(&o));
    // Not a model.
    assert_eq!(code(&w.irm(&["validate", "--model", &journal()])), 4);
}

#[test]
fn state_directory_flag_overrides_the_environment() {
    let w = Workdir::new();
    let other = w.path("elsewhere");
    let other_arg = other.display().to_string();
    let o = w.irm(&["--state", &other_arg, "segment", "--in", &doc()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(other.join("irm-state.json").exists());
    assert!(!w.state_dir().exists());
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut out = String::new();
    s.read_to_string(&mut out).ok()?;
    Some(out)
}

struct Killed(std::process::Child);

impl Drop for Killed {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_answers_on_loopback() {
    let w = Workdir::new();
    assert_eq!(code(&w.irm(&["run", "--in", &doc()])), 2);
    let port = free_port();
    let child = w.command(&["serve", "--port", &port.to_string()]).stdout(Stdio::null()).stderr(Stdio::null()).spawn().unwrap();
    let _guard = Killed(child);
    let deadline = Instant::now() + Duration::from_secs(20);
    let response = loop {
        if let Some(r) = http_get(port, "/api/sessions/irm/state") {
            break r;
        }
        assert!(Instant::now() < deadline, "service did not come up");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let body = &response[response.find("\r\n\r\n").unwrap() + 4..];
    let v: Value = serde_json::from_str(body).unwrap();
    assert_eq!(v["session"], "irm");
    assert_eq!(v["stopped_at"], "flow");
}

#[test]
fn serve_needs_a_state() {
    let w = Workdir::new();
    assert_eq!(code(&w.irm(&["serve", "--port", "1"])), 4);
}
