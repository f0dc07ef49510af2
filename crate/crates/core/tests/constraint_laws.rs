mod common;

use proptest::prelude::*;
use serde_json::json;

use rpo_core::constraint::{parse_constraint, ConstraintError};
use rpo_core::{Constraint, ConstraintKind};

use common::{oracle_check, random_constraint, random_response, rng};

#[test]
fn complement_law_holds_on_ten_thousand_seeded_cases() {
    let mut r = rng(2024);
    let mut exceptions = Vec::new();
    for i in 0..10_000 {
        let c = random_constraint(&mut r, "c");
        let y = random_response(&mut r);
        if c.reverse().check(&y) == c.check(&y) {
            exceptions.push((i, c.kind.clone(), y));
        }
    }
    assert!(
        exceptions.is_empty(),
        "{} exceptions, first: {:?}",
        exceptions.len(),
        exceptions.first()
    );
}

#[test]
fn involution_restores_verdicts_and_identity() {
    let mut r = rng(7);
    for _ in 0..2_000 {
        let c = random_constraint(&mut r, "c");
        let back = c.reverse().reverse();
        assert_eq!(back.kind, c.kind);
        assert_eq!(back.id, c.id);
        for _ in 0..5 {
            let y = random_response(&mut r);
            assert_eq!(back.check(&y), c.check(&y));
        }
    }
}

#[test]
fn checkers_agree_with_reference_oracle() {
    let mut r = rng(99);
    for _ in 0..10_000 {
        let c = random_constraint(&mut r, "c");
        let y = random_response(&mut r);
        assert_eq!(c.check(&y), oracle_check(&c.kind, &y), "{:?} on {y:?}", c.kind);
    }
}

#[test]
fn reversal_sets_provenance_and_rerenders() {
    let c = Constraint::new("A", ConstraintKind::MaxWords(199)).unwrap();
    let r = c.reverse();
    assert_eq!(r.kind, ConstraintKind::MinWords(200));
    assert_eq!(r.reversed_from.as_deref(), Some("A"));
    assert_eq!(r.description, "The response must contain at least 200 words.");
    let kw = Constraint::new(
        "k",
        ConstraintKind::IncludeKeyword {
            keyword: "duck".into(),
            min_count: 1,
        },
    )
    .unwrap();
    assert_eq!(
        kw.reverse().kind,
        ConstraintKind::ExcludeKeyword {
            keyword: "duck".into(),
            max_count: 0
        }
    );
}

#[test]
fn check_examples() {
    let check = |kind: ConstraintKind, y: &str| Constraint::new("x", kind).unwrap().check(y);
    assert!(check(ConstraintKind::MaxWords(5), "one two three"));
    assert!(!check(
        ConstraintKind::IncludeKeyword {
            keyword: "duck".into(),
            min_count: 1
        },
        "a swan swims"
    ));
    assert!(check(ConstraintKind::EndsWith("!".into()), "Go!"));
}

#[test]
fn render_templates() {
    let render = |kind: ConstraintKind| Constraint::new("x", kind).unwrap().description;
    assert_eq!(
        render(ConstraintKind::MaxWords(199)),
        "The response must contain at most 199 words."
    );
    assert_eq!(
        render(ConstraintKind::MinWords(200)),
        "The response must contain at least 200 words."
    );
    assert_eq!(
        render(ConstraintKind::ExcludeKeyword {
            keyword: "duck".into(),
            max_count: 0
        }),
        "The response must not mention 'duck'."
    );
}

#[test]
fn parse_examples() {
    let c = parse_constraint(&json!({"id": "A", "kind": "MaxWords", "n": 199})).unwrap();
    assert_eq!(c.kind, ConstraintKind::MaxWords(199));
    assert_eq!(
        parse_constraint(&json!({"id": "A", "kind": "MaxWords", "n": -1})).unwrap_err(),
        ConstraintError::BadParams("n".into())
    );
    assert!(matches!(
        parse_constraint(&json!({"id": "A", "kind": "Frobnicate"})).unwrap_err(),
        ConstraintError::UnknownKind(_)
    ));
}

#[test]
fn serialized_form_round_trips_for_every_kind() {
    let mut r = rng(5);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..2_000 {
        let c = random_constraint(&mut r, "c");
        for c in [c.clone(), c.reverse()] {
            seen.insert(c.kind.name());
            let text = serde_json::to_string(&c).unwrap();
            let back: Constraint = serde_json::from_str(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
    }
    assert_eq!(seen.len(), 14);
}

#[test]
fn checks_are_deterministic_across_threads() {
    let mut r = rng(11);
    let cases: Vec<(Constraint, String)> = (0..2_000)
        .map(|_| (random_constraint(&mut r, "c"), random_response(&mut r)))
        .collect();
    let serial: Vec<bool> = cases.iter().map(|(c, y)| c.check(y)).collect();
    let parallel: Vec<bool> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .chunks(500)
            .map(|chunk| s.spawn(move || chunk.iter().map(|(c, y)| c.check(y)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(serial, parallel);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn complement_law_on_arbitrary_text(seed in any::<u64>(), y in "\\PC{0,40}") {
        let c = random_constraint(&mut rng(seed), "c");
        prop_assert_ne!(c.reverse().check(&y), c.check(&y));
        prop_assert_eq!(c.check(&y), oracle_check(&c.kind, &y));
    }
}
