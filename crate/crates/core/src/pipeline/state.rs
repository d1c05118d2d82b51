//! On-disk pipeline state: the inputs of the last run, the hashes they had
//! and what the run produced.
//!
//! A state directory holds `irm-state.json`, the default journal
//! `journal.jsonl` and a lock file. Writers take an advisory lock on the
//! lock file for the duration of a command.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{run, PipelineError, PipelineInput, RunConfig, RunOutcome, Stage};
use crate::flow::{DecisionJournal, FlowError};
use crate::model::canonical_json;

pub const STATE_FILE: &str = "irm-state.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";
const LOCK_FILE: &str = "irm-state.lock";
const STATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("state directory {0} is in use by another process")]
    Locked(PathBuf),
    #[error("{path} is not a valid state file: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("no document in {0}; pass one with --in")]
    NoInput(PathBuf),
    #[error("journal {path}: {source}")]
    Journal { path: PathBuf, source: FlowError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StateError + '_ {
    move |source| StateError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub version: u32,
    pub input: PipelineInput,
    pub config: RunConfig,
    /// Journal the run read; relative paths are relative to the state directory.
    pub journal_path: PathBuf,
    pub input_sha256: String,
    pub config_sha256: String,
    pub journal_sha256: String,
    /// Stage the run was asked to reach.
    pub until: Stage,
    /// Increases by one whenever the outcome is recomputed.
    pub revision: u64,
    pub outcome: RunOutcome,
}

impl PipelineState {
    /// Whether the stored outcome answers a request to run up to `until`
    /// with these inputs.
    pub fn is_fresh(&self, input: &PipelineInput, config: &RunConfig, journal: &DecisionJournal, until: Stage) -> bool {
        self.until >= until
            && self.input_sha256 == input.sha256()
            && self.config_sha256 == config.sha256()
            && self.journal_sha256 == journal.sha256()
    }
}

/// Holds the advisory lock until dropped.
#[derive(Debug)]
pub struct StateLock {
    _file: File,
}

#[derive(Debug, Clone)]
pub struct StateDir {
    root: PathBuf,
}

impl StateDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        StateDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn state_path(&self) -> PathBuf {
        self.root.join(STATE_FILE)
    }

    pub fn default_journal(&self) -> PathBuf {
        self.root.join(JOURNAL_FILE)
    }

    /// Resolves a journal path stored in the state.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    /// Takes the advisory lock without waiting.
    pub fn lock(&self) -> Result<StateLock, StateError> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let path = self.root.join(LOCK_FILE);
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(&path).map_err(io_err(&path))?;
        match file.try_lock() {
            Ok(()) => Ok(StateLock { _file: file }),
            Err(TryLockError::WouldBlock) => Err(StateError::Locked(self.root.clone())),
            Err(TryLockError::Error(e)) => Err(StateError::Io { path, source: e }),
        }
    }

    pub fn load(&self) -> Result<Option<PipelineState>, StateError> {
        let path = self.state_path();
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(StateError::Io { path, source: e }),
        };
        let state: PipelineState =
            serde_json::from_str(&text).map_err(|e| StateError::Corrupt { path: path.clone(), reason: e.to_string() })?;
        if state.version != STATE_VERSION {
            return Err(StateError::Corrupt { path, reason: format!("version {} is not {STATE_VERSION}", state.version) });
        }
        Ok(Some(state))
    }

    /// Writes through a temporary file so readers never see half a state.
    pub fn save(&self, state: &PipelineState) -> Result<(), StateError> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let path = self.state_path();
        let tmp = self.root.join(format!("{STATE_FILE}.tmp"));
        fs::write(&tmp, canonical_json(state)).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    /// Reads a journal; a missing file is an empty journal.
    pub fn read_journal(&self, path: &Path) -> Result<DecisionJournal, StateError> {
        let path = self.resolve(path);
        match fs::read_to_string(&path) {
            Ok(text) => DecisionJournal::parse_jsonl(&text).map_err(|source| StateError::Journal { path, source }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(DecisionJournal::new()),
            Err(e) => Err(StateError::Io { path, source: e }),
        }
    }

    pub fn write_journal(&self, path: &Path, journal: &DecisionJournal) -> Result<(), StateError> {
        let path = self.resolve(path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, journal.to_jsonl()).map_err(io_err(&path))
    }
}

#[derive(Debug, Error)]
pub enum RefreshError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Reuses `previous` when its hashes match, otherwise runs the pipeline
/// and returns a state with the next revision. The flag tells whether the
/// outcome was recomputed.
pub fn refresh(
    previous: Option<PipelineState>,
    input: PipelineInput,
    config: RunConfig,
    journal_path: PathBuf,
    journal: &DecisionJournal,
    until: Stage,
    force: bool,
) -> Result<(PipelineState, bool), PipelineError> {
    if let Some(prev) = &previous {
        if !force && prev.journal_path == journal_path && prev.is_fresh(&input, &config, journal, until) {
            return Ok((prev.clone(), false));
        }
    }
    let outcome = run(&input, journal, &config, until)?;
    let state = PipelineState {
        version: STATE_VERSION,
        input_sha256: input.sha256(),
        config_sha256: config.sha256(),
        journal_sha256: journal.sha256(),
        input,
        config,
        journal_path,
        until,
        revision: previous.map_or(1, |p| p.revision + 1),
        outcome,
    };
    Ok((state, true))
}
