mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use mdq_core::analysis::*;
use mdq_core::md::validate_schema;

fn marked(pairs: &[(&str, &str)]) -> Marking {
    pairs.iter().map(|(r, v)| (Arc::from(*r), Arc::from(*v))).collect()
}

#[test]
fn hospital_rule_classes() {
    let o = common::full();
    let class = |l: &str| classify_rule(o.rule(l).unwrap(), &o.schema);
    assert_eq!(class("r7"), RuleClass::DimensionalTgd { direction: Direction::Upward });
    assert_eq!(class("r8"), RuleClass::DimensionalTgd { direction: Direction::Downward });
    assert_eq!(class("r9"), RuleClass::DowncastTgd);
    assert_eq!(class("r6"), RuleClass::DimensionalEgd);
    assert_eq!(class("ref_patient_unit"), RuleClass::ReferentialNc);
    assert_eq!(class("intensive_closed"), RuleClass::DimensionalNc);
}

#[test]
fn hospital_schema_is_valid() {
    assert!(validate_schema(&common::full().schema).is_empty());
}

#[test]
fn hospital_marking() {
    let o = common::core();
    assert_eq!(mark_variables(&o.rules), marked(&[("r7", "w"), ("r8", "u"), ("r8", "t")]));
}

#[test]
fn hospital_finite_positions_cover_categorical_attributes() {
    let o = common::core();
    let (g, finite) = compute_finite_positions(&o.rules);
    assert!(!g.special_edges.is_empty());
    for rel in ["PatientWard", "PatientUnit", "WorkingSchedules", "Shifts"] {
        for i in 0..2 {
            assert!(finite.contains(&Position::new(rel, i)), "{rel}[{i}]");
        }
    }
    // No cycles at all, so every position is finite.
    assert_eq!(finite, g.nodes);
}

#[test]
fn hospital_is_weakly_sticky_but_not_sticky() {
    for o in [common::core(), common::full(), common::with_quality()] {
        assert!(is_weakly_sticky(&o.rules).accepted());
    }
    let o = common::core();
    assert_eq!(
        is_sticky(&o.rules),
        Verdict::Reject { witness: Witness { rule: "r7".into(), variable: "w".into() } }
    );
}

#[test]
fn separability_with_and_without_downcast_rule() {
    let core = common::core();
    let r = analyze(&core);
    assert_eq!(r.separability, Separability::Guaranteed);
    let full = common::full();
    let Separability::NotGuaranteed { reason } = analyze(&full).separability else {
        panic!("expected NotGuaranteed");
    };
    assert!(reason.contains("r9"));
    assert_eq!(check_separability(&[], &full.rules, &full.schema), Separability::Guaranteed);
}

#[test]
fn no_repeated_variables_is_vacuously_weakly_sticky() {
    let o = mdq_core::parse_program("predicate A(x, y).\npredicate B(x).\ntgd exists z. A(x, z) <- B(x).\ntgd B(y) <- A(x, y).").unwrap();
    assert!(is_weakly_sticky(&o.rules).accepted());
    let _: BTreeSet<Position> = compute_finite_positions(&o.rules).1;
}

#[test]
fn downcast_fed_by_invented_values_breaks_weak_stickiness() {
    let core = std::fs::read_to_string(common::fixture("hospital_core.mdq")).unwrap();
    let extra = "tgd k1: exists z. WorkingSchedules(u, d; t, z) <- WorkingSchedules(u, d; n, t).\n\
                 tgd k2: exists w. UnitWard(u, w), PatientWard(w, d; n) <- WorkingSchedules(u, d; n, t).\n";
    let o = mdq_core::parse_sources(&[("core", &core), ("extra", extra)]).unwrap();
    assert_eq!(classify_rule(o.rule("k1").unwrap(), &o.schema), RuleClass::DimensionalTgd { direction: Direction::Lateral });
    assert_eq!(classify_rule(o.rule("k2").unwrap(), &o.schema), RuleClass::DowncastTgd);
    let Verdict::Reject { witness } = is_weakly_sticky(&o.rules) else { panic!("accepted") };
    assert_eq!((&*witness.rule, &*witness.variable), ("r7", "w"));

    // Without the copied nurse value the new wards are bounded again.
    let fixed = "tgd k1: exists z. WorkingSchedules(u, d; t, z) <- WorkingSchedules(u, d; n, t).\n\
                 tgd k2: exists w, m. UnitWard(u, w), PatientWard(w, d; m) <- WorkingSchedules(u, d; n, t).\n";
    let o = mdq_core::parse_sources(&[("core", &core), ("extra", fixed)]).unwrap();
    assert!(is_weakly_sticky(&o.rules).accepted());
}
