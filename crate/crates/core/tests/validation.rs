mod common;

use std::collections::BTreeSet;

use irm_core::model::deserialize;
use irm_core::pipeline::Stage;
use irm_core::validate::{validate, FindingKind, Severity, ValidateError, Verdict, DEFAULT_CAP};

fn kinds_of(name: &str) -> (BTreeSet<FindingKind>, Verdict) {
    let model = deserialize(&common::fixture(&format!("defects/{name}.json"))).unwrap();
    let report = validate(&model, DEFAULT_CAP).unwrap();
    (report.findings.iter().map(|f| f.kind).collect(), report.verdict)
}

#[test]
fn gold_model_passes_with_two_configurations() {
    let report = common::gold_run(Stage::Validate).report.unwrap();
    assert_eq!(report.configurations_examined, 2);
    assert_eq!(report.errors().count(), 0);
    assert_eq!(report.verdict, Verdict::Pass);
    assert_eq!(report.to_json(), common::fixture("gold_report.json"));
}

#[test]
fn removed_producer() {
    assert_eq!(kinds_of("missing_producer"), (BTreeSet::from([FindingKind::MissingInput]), Verdict::Errors));
}

#[test]
fn duplicated_writer_under_and() {
    assert_eq!(kinds_of("multiple_writers"), (BTreeSet::from([FindingKind::MultipleWriters]), Verdict::Errors));
}

#[test]
fn orphan_attribute() {
    assert_eq!(kinds_of("orphan_attribute"), (BTreeSet::from([FindingKind::UnusedAttribute]), Verdict::Warnings));
}

#[test]
fn missing_input_names_subject_and_consumers() {
    let model = deserialize(&common::fixture("defects/missing_producer.json")).unwrap();
    let report = validate(&model, DEFAULT_CAP).unwrap();
    for f in &report.findings {
        assert_eq!(f.subject, "E-Car::position");
        assert_eq!(f.severity, Severity::Error);
        assert!(!f.involved.is_empty());
        let inv = model.invariant(f.involved[0]).unwrap();
        assert!(inv.signature.inputs().any(|p| p.attr().to_string() == "E-Car::position"));
    }
    let configs: Vec<_> = report.findings.iter().map(|f| f.configuration).collect();
    assert_eq!(configs, [Some(1), Some(2)]);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let first = common::gold_run(Stage::Validate).report.unwrap().to_json();
    for _ in 0..4 {
        assert_eq!(common::gold_run(Stage::Validate).report.unwrap().to_json(), first);
    }
    let model = deserialize(&common::fixture("defects/missing_producer.json")).unwrap();
    let a = validate(&model, DEFAULT_CAP).unwrap();
    for _ in 0..4 {
        assert_eq!(validate(&model, DEFAULT_CAP).unwrap().to_json(), a.to_json());
        assert_eq!(validate(&model, DEFAULT_CAP).unwrap().to_text(), a.to_text());
    }
}

#[test]
fn configuration_cap_is_enforced() {
    let model = deserialize(&common::fixture("gold_model.json")).unwrap();
    assert_eq!(validate(&model, 1).unwrap_err(), ValidateError::ConfigurationExplosion { count: 2, cap: 1 });
    assert_eq!(validate(&model, 2).unwrap().configurations_examined, 2);
}
