mod common;

use irm_core::classify::{ClassifiedRequirement, Comparator, InvariantType};
use irm_core::pipeline::Stage;

fn requirements() -> Vec<ClassifiedRequirement> {
    common::gold_run(Stage::Classify).classification.unwrap().requirements
}

fn type_of(reqs: &[ClassifiedRequirement], id: &str) -> InvariantType {
    reqs.iter().find(|r| r.id == id).unwrap_or_else(|| panic!("no requirement {id}")).invariant_type.unwrap()
}

#[test]
fn fixture_labels() {
    let reqs = requirements();
    let expected = [
        ("1", InvariantType::Abstract),
        ("1(a)", InvariantType::Process),
        ("1(b)", InvariantType::Process),
        ("1(c)", InvariantType::Process),
        ("1(d)", InvariantType::Process),
        ("2", InvariantType::Process),
        ("3", InvariantType::Exchange),
        ("4/when", InvariantType::Assumption),
        ("4", InvariantType::Process),
        ("5/when", InvariantType::Assumption),
        ("5", InvariantType::Process),
    ];
    let ids: Vec<&str> = reqs.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, expected.iter().map(|(i, _)| *i).collect::<Vec<_>>());
    for (id, ty) in expected {
        assert_eq!(type_of(&reqs, id), ty, "item {id}");
    }
}

#[test]
fn situations_carry_timing_and_condition() {
    let reqs = requirements();
    let get = |id: &str| reqs.iter().find(|r| r.id == id).unwrap();
    assert_eq!(get("4").timing.as_ref().unwrap().period_seconds, 60.0);
    assert_eq!(get("5").timing.as_ref().unwrap().period_seconds, 10.0);
    let far = get("4/when").condition.as_ref().unwrap();
    assert_eq!(far.comparator, Some(Comparator::Gt));
    assert_eq!(far.formula(), "distance(E-Car::position, E-Car::POI) > 5 km");
    let near = get("5/when").condition.as_ref().unwrap();
    assert_eq!(near.comparator, Some(Comparator::Le));
    assert!(get("4/when").is_assumption());
}

#[test]
fn confidence_stays_in_unit_interval() {
    for r in requirements() {
        assert!((0.0..=1.0).contains(&r.confidence), "{}: {}", r.id, r.confidence);
    }
}
