mod common;

use proptest::prelude::*;

use rpo_core::adherence::{classify_pair, dominates, evaluate, gap, is_perfect, AdherenceError};
use rpo_core::{AdherenceVector, Constraint, ConstraintKind, ConstraintSet, PairClass};

use common::follows;

fn vectors(k: usize) -> impl Strategy<Value = (Vec<bool>, Vec<bool>, Vec<bool>)> {
    (
        prop::collection::vec(any::<bool>(), k),
        prop::collection::vec(any::<bool>(), k),
        prop::collection::vec(any::<bool>(), k),
    )
}

fn v(bits: Vec<bool>) -> AdherenceVector {
    AdherenceVector::new("s", bits)
}

#[test]
fn fixture_gaps() {
    assert_eq!(gap(&follows("s", 6, "ABC"), &follows("s", 6, "DEF")).unwrap(), 6);
    assert_eq!(gap(&follows("s", 6, "ABCD"), &follows("s", 6, "DEF")).unwrap(), 5);
    assert_eq!(gap(&follows("s", 6, "ABC"), &follows("s", 6, "ABC")).unwrap(), 0);
}

#[test]
fn fixture_classes() {
    assert_eq!(
        classify_pair(&follows("s", 6, "ABC"), &follows("s", 6, "DEF")).unwrap(),
        PairClass::EqualIncomparable
    );
    assert_eq!(
        classify_pair(&follows("s", 6, "DEF"), &follows("s", 6, "ABCD")).unwrap(),
        PairClass::HigherIncomparable
    );
    assert_eq!(
        classify_pair(&follows("s", 6, "ABCDEF"), &follows("s", 6, "D")).unwrap(),
        PairClass::DominantPerfect
    );
    assert_eq!(
        classify_pair(&follows("s", 6, "ABD"), &follows("s", 6, "D")).unwrap(),
        PairClass::DominantImperfect
    );
    assert!(matches!(
        classify_pair(&follows("s", 6, "A"), &follows("s", 6, "A")),
        Err(AdherenceError::NoDifference)
    ));
}

#[test]
fn mismatched_sets_are_rejected() {
    let a = AdherenceVector::new("x", vec![true]);
    let b = AdherenceVector::new("y", vec![true]);
    assert!(gap(&a, &b).is_err());
    assert!(dominates(&a, &b).is_err());
    assert!(is_perfect(&AdherenceVector::new("x", vec![])).is_err());
}

#[test]
fn evaluate_examples() {
    let cs = ConstraintSet::new(
        "s",
        vec![
            Constraint::new("a", ConstraintKind::MaxWords(5)).unwrap(),
            Constraint::new(
                "b",
                ConstraintKind::IncludeKeyword {
                    keyword: "hi".into(),
                    min_count: 1,
                },
            )
            .unwrap(),
            Constraint::new("c", ConstraintKind::MinWords(1)).unwrap(),
        ],
    )
    .unwrap();
    assert_eq!(evaluate(&cs, "hi there").bits, vec![true, true, true]);
    assert_eq!(evaluate(&cs, "a b c d e f").bits, vec![false, false, true]);
    assert_eq!(evaluate(&cs, "").bits, vec![true, false, false]);
    assert_eq!(evaluate(&cs, "").set_id, "s");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn gap_is_a_metric((a, b, c) in (1usize..12).prop_flat_map(vectors)) {
        let (a, b, c) = (v(a), v(b), v(c));
        let ab = gap(&a, &b).unwrap();
        prop_assert_eq!(ab, gap(&b, &a).unwrap());
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(ab <= a.len());
        prop_assert!(gap(&a, &c).unwrap() <= ab + gap(&b, &c).unwrap());
    }

    #[test]
    fn dominance_implies_score_gap((a, b, _) in (1usize..12).prop_flat_map(vectors)) {
        let (a, b) = (v(a), v(b));
        if dominates(&a, &b).unwrap() {
            prop_assert!(a.score() > b.score());
            prop_assert_eq!(gap(&a, &b).unwrap(), a.score() - b.score());
            prop_assert!(!dominates(&b, &a).unwrap());
        }
        prop_assert!(!dominates(&a, &a).unwrap());
    }

    #[test]
    fn dominant_perfect_iff_top_perfect_and_dominating((a, b, _) in (1usize..12).prop_flat_map(vectors)) {
        let (a, b) = (v(a), v(b));
        prop_assume!(a != b);
        let class = classify_pair(&a, &b).unwrap();
        prop_assert_eq!(class, classify_pair(&b, &a).unwrap());
        let (top, bottom) = if (a.score(), &a.bits) >= (b.score(), &b.bits) { (&a, &b) } else { (&b, &a) };
        let expected = is_perfect(top).unwrap() && dominates(top, bottom).unwrap();
        prop_assert_eq!(class == PairClass::DominantPerfect, expected);
        prop_assert_eq!(class == PairClass::EqualIncomparable, a.score() == b.score());
    }
}
