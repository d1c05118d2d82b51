//! `irm`: runs the requirements-to-model pipeline stage by stage.
//!
//! Exit codes: 0 done, 2 blocked on designer decisions, 3 validation
//! errors, 4 bad input.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use irm_core::flow::DecisionPolicy;
use irm_core::lexicon::Measure;
use irm_core::model::{deserialize, serialize};
use irm_core::pipeline::{refresh, PipelineError, PipelineInput, PipelineState, RunConfig, RunOutcome, Stage, StateDir, StateError};
use irm_core::validate::{validate, ValidateError, ValidationReport, Verdict, DEFAULT_CAP};
use irm_review::ReviewService;

mod render;

const EXIT_PENDING: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "irm", version, about = "Turn natural-language requirements into an IRM-SA invariant model")]
struct Cli {
    /// State directory holding irm-state.json and the default journal.
    #[arg(long, global = true, env = "IRM_STATE_DIR", default_value = ".irm")]
    state: PathBuf,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split the document into sections, items and sentences, and parse them.
    Segment(StageArgs),
    /// Mine components and attributes.
    Extract(StageArgs),
    /// Type every requirement.
    Classify(StageArgs),
    /// Infer knowledge-flow signatures.
    Flow(StageArgs),
    /// Compose the invariant model.
    Compose(StageArgs),
    /// Validate the model of the pipeline, or a model file given with --model.
    Validate(ValidateArgs),
    /// Run every stage, stopping where decisions are needed.
    Run(StageArgs),
    /// Serve the review API for the state directory on 127.0.0.1.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeasureArg {
    Path,
    Wup,
}

#[derive(Debug, Args)]
struct StageArgs {
    /// Requirements document; defaults to the one stored in the state.
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Gold dependency parse in CoNLL-U, used instead of the built-in parser.
    #[arg(long, value_name = "FILE")]
    conllu: Option<PathBuf>,
    /// Decision journal (JSON Lines); defaults to <state>/journal.jsonl.
    #[arg(long, value_name = "FILE")]
    journal: Option<PathBuf>,
    /// Synset lexicon replacing the bundled one.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Seed verbs replacing the bundled ones.
    #[arg(long, value_name = "FILE")]
    seeds: Option<PathBuf>,
    /// Minimum string similarity for alias links, in [0, 1].
    #[arg(long)]
    threshold: Option<f64>,
    /// Verb similarity measure.
    #[arg(long, value_enum)]
    measure: Option<MeasureArg>,
    /// Largest number of configurations to validate.
    #[arg(long)]
    cap: Option<usize>,
    /// Recompute even if the stored outcome is up to date.
    #[arg(long)]
    force: bool,
    /// Answer every open request with its suggestion (not written to the journal).
    #[arg(long)]
    assume_defaults: bool,
    /// Also write the result to a file: the model document for compose,
    /// the validation report for validate and run, stage JSON otherwise.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Model document to check instead of the pipeline's model.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["input", "conllu", "journal"])]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
}

/// Failures carrying their exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input_error(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_INPUT, error: error.into() }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Validate(_) => EXIT_INVALID,
            PipelineError::Unresolved { .. } => EXIT_PENDING,
            _ => EXIT_INPUT,
        };
        Failure { code, error: e.into() }
    }
}

impl From<StateError> for Failure {
    fn from(e: StateError) -> Self {
        input_error(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let dir = StateDir::new(&cli.state);
    let (stage, args) = match &cli.command {
        Command::Segment(a) => (Stage::Segment, a),
        Command::Extract(a) => (Stage::Extract, a),
        Command::Classify(a) => (Stage::Classify, a),
        Command::Flow(a) => (Stage::Flow, a),
        Command::Compose(a) => (Stage::Compose, a),
        Command::Validate(v) => match &v.model {
            Some(model) => return validate_file(model, v.stage.cap, cli.json),
            None => (Stage::Validate, &v.stage),
        },
        Command::Run(a) => (Stage::Validate, a),
        Command::Serve(s) => return serve(&dir, s.port),
    };
    let run_all = matches!(cli.command, Command::Run(_));
    let state = run_stage(&dir, stage, args)?;
    let outcome = &state.outcome;
    if run_all {
        emit(&if cli.json { render::run_json(&state) } else { render::run_text(&state) });
    } else if outcome.stopped_at.is_some_and(|s| s <= stage) {
        emit(&if cli.json { render::pending_json(&state) } else { render::pending_text(outcome) });
    } else {
        emit(&if cli.json { render::stage_json(stage, &state) } else { render::stage_text(stage, outcome) });
    }
    if let Some(path) = &args.out {
        write_out(path, stage, &state)?;
    }
    Ok(exit_code(outcome, stage))
}

fn write_out(path: &Path, stage: Stage, state: &PipelineState) -> Result<(), Failure> {
    let o = &state.outcome;
    let text = match stage {
        _ if o.stopped_at.is_some_and(|s| s <= stage) => render::pending_json(state) + "\n",
        Stage::Compose => o.model.as_ref().map(serialize).unwrap_or_default(),
        Stage::Validate => o.report.as_ref().map(ValidationReport::to_json).unwrap_or_default(),
        _ => render::stage_json(stage, state) + "\n",
    };
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())).map_err(input_error)
}

/// Writes to stdout; a closed pipe (`irm … | head`) is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") });
}

fn exit_code(outcome: &RunOutcome, stage: Stage) -> u8 {
    if outcome.stopped_at.is_some_and(|s| s <= stage) {
        return EXIT_PENDING;
    }
    match &outcome.report {
        Some(r) if stage == Stage::Validate && r.verdict == Verdict::Errors => EXIT_INVALID,
        _ => 0,
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(input_error)
}

fn absolute(path: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(path).with_context(|| format!("bad path {}", path.display())).map_err(input_error)
}

fn config_from(args: &StageArgs) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::default();
    if args.assume_defaults {
        config.policy = DecisionPolicy::AssumeDefaults;
    }
    if let Some(t) = args.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(input_error(anyhow::anyhow!("--threshold must lie in [0, 1], got {t}")));
        }
        config.threshold = t;
    }
    if let Some(m) = args.measure {
        config.measure = match m {
            MeasureArg::Path => Measure::Path,
            MeasureArg::Wup => Measure::Wup,
        };
    }
    if let Some(cap) = args.cap {
        if cap == 0 {
            return Err(input_error(anyhow::anyhow!("--cap must be at least 1")));
        }
        config.cap = cap;
    }
    config.lexicon = args.lexicon.as_deref().map(read).transpose()?;
    config.seeds = args.seeds.as_deref().map(read).transpose()?;
    Ok(config)
}

/// Runs (or reuses) the pipeline up to `stage` under the state lock and
/// saves the state when it changed.
fn run_stage(dir: &StateDir, stage: Stage, args: &StageArgs) -> Result<PipelineState, Failure> {
    let config = config_from(args)?;
    let document = args.input.as_deref().map(read).transpose()?;
    let conllu = args.conllu.as_deref().map(read).transpose()?;
    let _lock = dir.lock()?;
    let previous = dir.load()?;
    let input = match (document, &previous) {
        (Some(document), _) => PipelineInput { document, conllu },
        (None, Some(prev)) => PipelineInput { document: prev.input.document.clone(), conllu: conllu.or(prev.input.conllu.clone()) },
        (None, None) => return Err(StateError::NoInput(dir.root().to_path_buf()).into()),
    };
    let journal_path = match (&args.journal, &previous) {
        (Some(p), _) => absolute(p)?,
        (None, Some(prev)) => prev.journal_path.clone(),
        (None, None) => absolute(&dir.default_journal())?,
    };
    let journal = dir.read_journal(&journal_path)?;
    let (state, recomputed) = refresh(previous, input, config, journal_path, &journal, stage, args.force)?;
    if recomputed {
        dir.save(&state)?;
        log::info!("state saved at revision {}", state.revision);
    } else {
        log::info!("state is up to date (revision {})", state.revision);
    }
    Ok(state)
}

fn validate_file(path: &Path, cap: Option<usize>, as_json: bool) -> Result<u8, Failure> {
    let model = deserialize(&read(path)?).with_context(|| format!("{} is not a valid model", path.display())).map_err(input_error)?;
    let report = match validate(&model, cap.unwrap_or(DEFAULT_CAP)) {
        Ok(r) => r,
        Err(e @ ValidateError::ConfigurationExplosion { .. }) => return Err(Failure { code: EXIT_INVALID, error: e.into() }),
    };
    print_report(&report, as_json);
    Ok(if report.verdict == Verdict::Errors { EXIT_INVALID } else { 0 })
}

fn print_report(report: &ValidationReport, as_json: bool) {
    emit(&if as_json { report.to_json() } else { report.to_text() });
}

fn serve(dir: &StateDir, port: u16) -> Result<u8, Failure> {
    if dir.load()?.is_none() {
        return Err(StateError::NoInput(dir.root().to_path_buf()).into());
    }
    let id = session_id(dir.root());
    let service = ReviewService::new().with_session(&id, dir.clone());
    eprintln!("serving session `{id}` on http://127.0.0.1:{port}/api/sessions/{id}/state");
    let runtime = tokio::runtime::Runtime::new().map_err(input_error)?;
    runtime.block_on(irm_review::serve(service, port)).with_context(|| format!("cannot serve on port {port}")).map_err(input_error)?;
    Ok(0)
}

/// Session id for a state directory: its final path component.
fn session_id(root: &Path) -> String {
    std::path::absolute(root)
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().trim_start_matches('.').to_string()))
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "default".into())
}
