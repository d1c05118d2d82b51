//! Independent reference implementations and seeded property checks.
//!
//! Shared by the property tests of this crate and the acceptance target of
//! the command line crate; every check returns the first counterexample.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use irm_core::classify::InvariantType;
use irm_core::extract::AttrRef;
use irm_core::flow::{
    collect_params, direction_target, infer_directions, DecisionJournal, DecisionKind, DecisionRequest, Direction, FlowSignature,
    KnowledgeParameter,
};
use irm_core::lexicon::{jaro, jaro_winkler, levenshtein, path_similarity, wup_similarity, SynsetGraph, SynsetPos};
use irm_core::model::{
    canonical_json, serialize, Decomposition, DecompositionKind, Invariant, IrmModel, ModelAttribute, ModelComponent, Origin,
};
use irm_core::pipeline::{run, PipelineInput, RunConfig, Stage};
use irm_core::validate::enumerate_configurations;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($arg)+));
        }
    };
}

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn document() -> PipelineInput {
    PipelineInput::new(fixture("ecnp.txt"))
}

pub fn gold_journal() -> DecisionJournal {
    DecisionJournal::parse_jsonl(&fixture("gold_journal.jsonl")).expect("gold journal parses")
}

// ---------------------------------------------------------------- strings

/// Textbook Wagner-Fischer over the full matrix.
pub fn edit_distance_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Metric axioms of the edit distance and agreement with the oracle.
pub fn edit_distance_axioms(a: &str, b: &str, c: &str) -> Check {
    let ab = levenshtein(a, b);
    ensure!(ab == edit_distance_oracle(a, b), "d({a:?}, {b:?}) = {ab}, oracle {}", edit_distance_oracle(a, b));
    ensure!(ab == levenshtein(b, a), "asymmetric on {a:?}, {b:?}");
    ensure!(levenshtein(a, a) == 0, "d({a:?}, {a:?}) != 0");
    ensure!((ab == 0) == (a == b), "d({a:?}, {b:?}) = 0 for distinct strings");
    ensure!(levenshtein(a, c) <= ab + levenshtein(b, c), "triangle fails on {a:?}, {b:?}, {c:?}");
    Ok(())
}

/// Bounds, symmetry and identity of the Jaro family.
pub fn jaro_axioms(a: &str, b: &str) -> Check {
    for (name, f) in [("jaro", jaro as fn(&str, &str) -> f64), ("jaro_winkler", jaro_winkler)] {
        let ab = f(a, b);
        ensure!((0.0..=1.0).contains(&ab), "{name}({a:?}, {b:?}) = {ab}");
        ensure!((ab - f(b, a)).abs() < 1e-12, "{name} asymmetric on {a:?}, {b:?}");
        ensure!(a.is_empty() || (f(a, a) - 1.0).abs() < 1e-12, "{name}({a:?}, {a:?}) != 1");
    }
    ensure!(jaro_winkler(a, b) + 1e-12 >= jaro(a, b), "prefix bonus lowered the score on {a:?}, {b:?}");
    Ok(())
}

fn random_word(rng: &mut StdRng) -> String {
    // A small alphabet so that random words share characters often.
    const ALPHABET: [char; 6] = ['a', 'b', 'c', 'é', ' ', '-'];
    (0..rng.gen_range(0..=9)).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

pub fn check_string_metrics(cases: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..cases {
        let (a, b, c) = (random_word(&mut rng), random_word(&mut rng), random_word(&mut rng));
        edit_distance_axioms(&a, &b, &c)?;
        jaro_axioms(&a, &b)?;
    }
    Ok(())
}

// ------------------------------------------------------------- similarity

/// Path and Wu-Palmer similarity over every pair of bundled synsets of
/// the same part of speech: within (0, 1], symmetric, 1 exactly on the
/// diagonal.
pub fn check_similarity_bounds() -> Check {
    let g = SynsetGraph::bundled();
    for pos in [SynsetPos::Verb, SynsetPos::Noun] {
        let ids: Vec<&str> = g.synsets().filter(|s| s.pos == pos).map(|s| s.id.as_str()).collect();
        ensure!(!ids.is_empty(), "no {pos:?} synsets");
        for a in &ids {
            for b in &ids {
                for f in [path_similarity, wup_similarity] {
                    let ab = f(a, b, &g).map_err(|e| e.to_string())?.value;
                    ensure!(ab > 0.0 && ab <= 1.0, "sim({a}, {b}) = {ab}");
                    let ba = f(b, a, &g).map_err(|e| e.to_string())?.value;
                    ensure!((ab - ba).abs() < 1e-12, "sim asymmetric on {a}, {b}");
                    ensure!((ab == 1.0) == (a == b), "sim({a}, {b}) = {ab}");
                }
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------- flow inference

const TYPES: [InvariantType; 4] = [InvariantType::Process, InvariantType::Exchange, InvariantType::Abstract, InvariantType::Assumption];

/// Up to four signatures with at most six parameters in total, plus a
/// journal answering some of them.
pub fn random_signatures(rng: &mut StdRng) -> (Vec<FlowSignature>, DecisionJournal) {
    let pool = [AttrRef::new("A", "x"), AttrRef::new("A", "y"), AttrRef::new("B", "z"), AttrRef::new("B", "w"), AttrRef::placeholder("B")];
    let mut budget = rng.gen_range(1..=6usize);
    let mut sigs = Vec::new();
    let mut journal = DecisionJournal::new();
    for i in 0..rng.gen_range(1..=4usize) {
        let ty = TYPES[rng.gen_range(0..TYPES.len())];
        let mut sig = FlowSignature::new(format!("s{i}"), Some(ty));
        let n = rng.gen_range(0..=budget.min(3));
        budget -= n;
        let mut attrs = pool.to_vec();
        attrs.shuffle(rng);
        for a in attrs.into_iter().take(n) {
            sig.params.push(KnowledgeParameter::new(&a, Direction::Undecided));
        }
        for p in &sig.params {
            if rng.gen_bool(0.25) {
                let choice = if rng.gen_bool(0.5) { "in" } else { "out" };
                journal.append(DecisionKind::Direction, direction_target(&sig.invariant, &p.attr()), choice, "prop", "t").unwrap();
            }
        }
        sigs.push(sig);
    }
    (sigs, journal)
}

fn journal_choice(journal: &DecisionJournal, sig: &str, attr: &AttrRef) -> Option<Direction> {
    journal.choice(DecisionKind::Direction, &direction_target(sig, attr)).and_then(Direction::parse)
}

fn needs_output(s: &FlowSignature) -> bool {
    matches!(s.invariant_type, Some(InvariantType::Process) | Some(InvariantType::Exchange))
}

/// Whether the journal alone leaves `s` without any possible output.
fn starved(s: &FlowSignature, journal: &DecisionJournal) -> bool {
    s.params.iter().all(|p| journal_choice(journal, &s.invariant, &p.attr()) == Some(Direction::In))
}

/// Exhaustive oracle: some assignment of the open parameters gives every
/// process and exchange invariant an output, except those the journal
/// itself starved.
pub fn some_completion_has_outputs(sigs: &[FlowSignature], journal: &DecisionJournal) -> bool {
    let open: Vec<(usize, usize)> = sigs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.params.iter().enumerate().filter(|(_, p)| p.direction == Direction::Undecided).map(move |(j, _)| (i, j)))
        .collect();
    let needy: Vec<usize> = sigs.iter().enumerate().filter(|(_, s)| needs_output(s) && !starved(s, journal)).map(|(i, _)| i).collect();
    (0u32..1 << open.len()).any(|mask| {
        needy.iter().all(|&i| {
            sigs[i].params.iter().enumerate().any(|(j, p)| match open.iter().position(|&o| o == (i, j)) {
                Some(bit) => mask & (1 << bit) != 0,
                None => p.direction == Direction::Out,
            })
        })
    })
}

fn keyed(sigs: &[FlowSignature]) -> BTreeMap<String, String> {
    sigs.iter().map(|s| (s.invariant.clone(), canonical_json(s))).collect()
}

fn request_ids(reqs: &[DecisionRequest]) -> BTreeSet<(String, bool)> {
    reqs.iter().map(|r| (r.id.clone(), r.blocking)).collect()
}

/// One random signature set: inference terminates, honours the journal,
/// asks about every open parameter, never rules out an output, is a
/// fixpoint and does not depend on input order.
pub fn direction_inference_case(sigs: &[FlowSignature], journal: &DecisionJournal) -> Check {
    let ctx = sigs.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" | ");
    let (out, requests) = infer_directions(sigs, journal).map_err(|e| format!("{ctx}: {e}"))?;
    ensure!(out.len() == sigs.len(), "{ctx}: signature count changed");
    for (before, after) in sigs.iter().zip(&out) {
        ensure!(before.invariant == after.invariant, "{ctx}: order changed");
        for p in &before.params {
            let q = after.param(&p.attr()).ok_or_else(|| format!("{ctx}: lost {}", p.attr()))?;
            if let Some(d) = journal_choice(journal, &before.invariant, &p.attr()) {
                ensure!(q.direction == d, "{ctx}: journal answer for {} ignored", p.attr());
            }
        }
        for q in &after.params {
            ensure!(before.param(&q.attr()).is_some() || q.attr().is_placeholder(), "{ctx}: invented {}", q.attr());
        }
    }
    for s in &out {
        for p in s.undecided() {
            let id = format!("direction/{}", direction_target(&s.invariant, &p.attr()));
            ensure!(requests.iter().any(|r| r.id == id && r.blocking), "{ctx}: no blocking request for {id}");
        }
        if s.is_finalized() && needs_output(s) && !starved(s, journal) {
            ensure!(s.outputs().next().is_some(), "{ctx}: settled {s} has no output");
        }
    }
    ensure!(some_completion_has_outputs(&out, journal), "{ctx}: no completion leaves every process an output");
    let (again, _) = infer_directions(&out, journal).map_err(|e| e.to_string())?;
    ensure!(keyed(&again) == keyed(&out), "{ctx}: not a fixpoint");
    let mut reversed = sigs.to_vec();
    reversed.reverse();
    let (rev, rev_requests) = infer_directions(&reversed, journal).map_err(|e| e.to_string())?;
    ensure!(keyed(&rev) == keyed(&out), "{ctx}: depends on input order");
    ensure!(request_ids(&rev_requests) == request_ids(&requests), "{ctx}: requests depend on input order");
    Ok(())
}

pub fn check_direction_inference(cases: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    for case in 0..cases {
        let (sigs, journal) = random_signatures(&mut rng);
        direction_inference_case(&sigs, &journal).map_err(|e| format!("case {case}: {e}"))?;
    }
    Ok(())
}

/// The fixture's signatures, shuffled: same result every time, with and
/// without the gold journal.
pub fn check_fixture_confluence(permutations: usize, seed: u64) -> Check {
    let o = run(&document(), &DecisionJournal::new(), &RunConfig::default(), Stage::Classify).map_err(|e| e.to_string())?;
    let catalog = o.catalog.ok_or("no catalog")?;
    let sigs: Vec<FlowSignature> =
        o.classification.ok_or("no classification")?.requirements.iter().map(|r| collect_params(r, &catalog)).collect();
    for journal in [DecisionJournal::new(), gold_journal()] {
        let (base, base_requests) = infer_directions(&sigs, &journal).map_err(|e| e.to_string())?;
        let mut rng = StdRng::seed_from_u64(seed);
        for _ in 0..permutations {
            let mut shuffled = sigs.clone();
            shuffled.shuffle(&mut rng);
            let (out, requests) = infer_directions(&shuffled, &journal).map_err(|e| e.to_string())?;
            ensure!(keyed(&out) == keyed(&base), "signatures depend on order");
            ensure!(request_ids(&requests) == request_ids(&base_requests), "requests depend on order");
        }
    }
    Ok(())
}

// ---------------------------------------------------------- configurations

pub fn node(id: u32) -> Invariant {
    Invariant {
        id,
        description: format!("node {id}"),
        invariant_type: InvariantType::Process,
        signature: FlowSignature::new(id.to_string(), Some(InvariantType::Process)),
        trace: Vec::new(),
        origin: Origin::Manual,
        system_output: false,
        condition: None,
        timing: None,
    }
}

/// A random forest of at most `max` invariants.
pub fn random_forest(rng: &mut StdRng, max: u32) -> IrmModel {
    let n = rng.gen_range(1..=max);
    let mut children: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for id in 2..=n {
        if rng.gen_bool(0.8) {
            children.entry(rng.gen_range(1..id)).or_default().push(id);
        }
    }
    let mut m = IrmModel::empty();
    m.components = vec![ModelComponent { name: "C".into(), attributes: vec![ModelAttribute { key: "a".into(), name: "a".into() }] }];
    m.invariants = (1..=n).map(node).collect();
    m.decompositions = children
        .into_iter()
        .map(|(parent, children)| {
            let kind = if children.len() >= 2 && rng.gen_bool(0.5) { DecompositionKind::Or } else { DecompositionKind::And };
            Decomposition { parent, children, kind }
        })
        .collect();
    m
}

/// Brute force over all subsets: a configuration holds every root, all
/// children of a selected AND, exactly one child of a selected OR, and no
/// node whose parent is unselected.
pub fn configurations_oracle(m: &IrmModel) -> BTreeSet<BTreeSet<u32>> {
    let ids: Vec<u32> = m.invariants.iter().map(|i| i.id).collect();
    let parent: BTreeMap<u32, u32> = m.decompositions.iter().flat_map(|d| d.children.iter().map(move |c| (*c, d.parent))).collect();
    let mut out = BTreeSet::new();
    for mask in 0u32..1 << ids.len() {
        let s: BTreeSet<u32> = ids.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, id)| *id).collect();
        let closed = ids.iter().all(|id| match parent.get(id) {
            Some(p) => s.contains(p) || !s.contains(id),
            None => s.contains(id),
        });
        let choices_ok = m.decompositions.iter().filter(|d| s.contains(&d.parent)).all(|d| {
            let picked = d.children.iter().filter(|c| s.contains(c)).count();
            match d.kind {
                DecompositionKind::And => picked == d.children.len(),
                DecompositionKind::Or => picked == 1,
            }
        });
        if closed && choices_ok {
            out.insert(s);
        }
    }
    out
}

pub fn check_configurations(cases: usize, seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    for case in 0..cases {
        let m = random_forest(&mut rng, 12);
        m.check().map_err(|e| format!("case {case}: generated model invalid: {e}"))?;
        let configs = enumerate_configurations(&m, 10_000).map_err(|e| e.to_string())?;
        let got: Vec<BTreeSet<u32>> = configs.iter().map(|c| c.selected.clone()).collect();
        let unique: BTreeSet<BTreeSet<u32>> = got.iter().cloned().collect();
        ensure!(unique.len() == got.len(), "case {case}: duplicate configurations");
        ensure!(unique == configurations_oracle(&m), "case {case}: {:?} gives {got:?}", m.decompositions);
        let ids: Vec<usize> = configs.iter().map(|c| c.id).collect();
        ensure!(ids == (1..=configs.len()).collect::<Vec<_>>(), "case {case}: ids {ids:?}");
    }
    Ok(())
}

// ------------------------------------------------------------------ replay

/// Every prefix of the gold journal, replayed twice, gives byte-identical
/// outcomes; the full journal, after a write/read round trip, gives the
/// golden model and report.
pub fn check_journal_replay() -> Check {
    let journal = gold_journal();
    let reparsed = DecisionJournal::parse_jsonl(&journal.to_jsonl()).map_err(|e| e.to_string())?;
    ensure!(reparsed == journal, "journal does not survive a round trip");
    for k in 0..=journal.len() {
        let prefix = journal.prefix(k);
        let a = run(&document(), &prefix, &RunConfig::default(), Stage::Validate).map_err(|e| e.to_string())?;
        let b = run(&document(), &prefix, &RunConfig::default(), Stage::Validate).map_err(|e| e.to_string())?;
        ensure!(canonical_json(&a) == canonical_json(&b), "prefix {k} replays differently");
    }
    let full = run(&document(), &reparsed, &RunConfig::default(), Stage::Validate).map_err(|e| e.to_string())?;
    ensure!(full.model.as_ref().map(serialize) == Some(fixture("gold_model.json")), "model differs from the golden file");
    ensure!(full.report.map(|r| r.to_json()) == Some(fixture("gold_report.json")), "report differs from the golden file");
    Ok(())
}

/// The gold journal answers distinct targets, so its order is irrelevant:
/// shuffled copies give the same model up to the journal reference.
pub fn check_journal_permutations(permutations: usize, seed: u64) -> Check {
    let journal = gold_journal();
    let strip = |mut m: IrmModel| {
        m.journal_ref.sha256.clear();
        serialize(&m)
    };
    let model = |j: &DecisionJournal| -> Result<String, String> {
        let o = run(&document(), j, &RunConfig::default(), Stage::Compose).map_err(|e| e.to_string())?;
        o.model.map(strip).ok_or_else(|| "no model".to_string())
    };
    let base = model(&journal)?;
    let mut rng = StdRng::seed_from_u64(seed);
    for n in 0..permutations {
        let mut entries = journal.entries().to_vec();
        entries.shuffle(&mut rng);
        let shuffled = DecisionJournal::from_entries(entries).map_err(|e| e.to_string())?;
        ensure!(model(&shuffled)? == base, "permutation {n} changes the model");
    }
    Ok(())
}
