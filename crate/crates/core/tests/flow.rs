mod common;

use irm_core::flow::{format_signature, parse_signature, Basis, DecisionJournal, Direction, FlowSignature};
use irm_core::model::needs_exchange;
use irm_core::pipeline::{run, RunConfig, Stage};

fn signatures() -> Vec<FlowSignature> {
    common::gold_run(Stage::Flow).signatures.unwrap()
}

fn sig<'a>(sigs: &'a [FlowSignature], id: &str) -> &'a FlowSignature {
    sigs.iter().find(|s| s.invariant == id).unwrap_or_else(|| panic!("no signature {id}"))
}

#[test]
fn plan_computation_signature() {
    let sigs = signatures();
    assert_eq!(format_signature(sig(&sigs, "1(d)")), "E-Car::energy, E-Car::POI, Parking::availability -> E-Car::plan");
}

#[test]
fn monitors_get_their_single_output_from_the_single_parameter_rule() {
    let sigs = signatures();
    for (id, text) in [("1(a)", "-> E-Car::energy"), ("1(b)", "-> E-Car::position")] {
        let s = sig(&sigs, id);
        assert_eq!(format_signature(s), text);
        assert_eq!(s.params.len(), 1);
        assert_eq!(s.params[0].direction, Direction::Out);
        assert_eq!(s.params[0].basis, Basis::SingleParameter, "{id}");
    }
}

#[test]
fn gold_signatures_are_final_and_reparse() {
    let o = common::gold_run(Stage::Flow);
    let catalog = o.catalog.as_ref().unwrap();
    for s in o.signatures.as_ref().unwrap() {
        assert!(s.is_finalized(), "{} not final", s.invariant);
        let text = format_signature(s);
        let back = parse_signature(&text, catalog).unwrap();
        assert_eq!(format_signature(&back), text);
    }
    assert!(o.blocking().next().is_none());
}

#[test]
fn exchange_detection() {
    let sigs = signatures();
    for id in ["1(d)", "3"] {
        assert!(needs_exchange(sig(&sigs, id)), "{id} should need an exchange");
    }
    for id in ["1(a)", "1(b)", "1(c)", "2"] {
        assert!(!needs_exchange(sig(&sigs, id)), "{id} should not need an exchange");
    }
}

#[test]
fn without_journal_the_run_stops_at_flow() {
    let o = run(&common::document(), &DecisionJournal::new(), &RunConfig::default(), Stage::Validate).unwrap();
    assert_eq!(o.stopped_at, Some(Stage::Flow));
    assert_eq!(o.reached, Stage::Classify);
    assert!(o.model.is_none());
    let blocking: Vec<&str> = o.blocking().map(|r| r.id.as_str()).collect();
    assert!(blocking.iter().all(|id| id.starts_with("direction/")), "{blocking:?}");
    assert!(blocking.contains(&"direction/3@E-Car::?"));
}

#[test]
fn journal_overrides_inference_and_can_be_reverted() {
    let mut journal = common::gold_journal();
    journal.append(irm_core::flow::DecisionKind::Direction, "1(a)@E-Car::energy", "in", "t", "2030-01-01T00:00:00Z").unwrap();
    let o = run(&common::document(), &journal, &RunConfig::default(), Stage::Flow).unwrap();
    let s = sig(o.signatures.as_ref().unwrap(), "1(a)");
    assert_eq!(s.params[0].direction, Direction::In);
    assert_eq!(s.params[0].basis, Basis::Journal);
    journal.append(irm_core::flow::DecisionKind::Direction, "1(a)@E-Car::energy", "out", "t", "2030-01-01T00:01:00Z").unwrap();
    let o = run(&common::document(), &journal, &RunConfig::default(), Stage::Flow).unwrap();
    assert_eq!(format_signature(sig(o.signatures.as_ref().unwrap(), "1(a)")), "-> E-Car::energy");
}
