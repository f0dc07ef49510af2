mod common;

use rand::seq::SliceRandom;

use rpo_core::metrics::{csr, isr, multi_if_accuracy, report, ssr, MetricsError, SessionRecord, TurnRecord};
use rpo_core::AdherenceVector;

use common::{metrics_oracle as oracle, random_sessions, rng};

#[test]
fn metrics_equal_brute_force_recount_on_random_sessions() {
    let mut r = rng(17);
    let sessions = random_sessions(&mut r, 1_000);
    let o = oracle(&sessions);
    let rep = report(&sessions).unwrap();
    assert_eq!(rep.csr, o.csr);
    assert_eq!(rep.isr, o.isr);
    assert_eq!(rep.ssr, o.ssr);
    assert_eq!(rep.per_step.len(), o.per_step.len());
    for (k, (got, want)) in rep.per_step.iter().zip(&o.per_step).enumerate() {
        assert_eq!(got.step, k + 1);
        assert_eq!((got.prompt_strict, got.inst_strict), *want);
    }
    assert!(rep.isr <= rep.csr);
}

#[test]
fn oracle_agreement_over_many_small_corpora() {
    let mut r = rng(18);
    for n in 1..200 {
        let sessions = random_sessions(&mut r, n % 25 + 1);
        let o = oracle(&sessions);
        assert_eq!(csr(&sessions).unwrap(), o.csr);
        assert_eq!(isr(&sessions).unwrap(), o.isr);
        assert_eq!(ssr(&sessions).unwrap(), o.ssr);
        assert!(o.isr <= o.csr);
    }
}

#[test]
fn metrics_ignore_session_order() {
    let mut r = rng(19);
    let mut sessions = random_sessions(&mut r, 300);
    let before = report(&sessions).unwrap();
    sessions.shuffle(&mut r);
    assert_eq!(report(&sessions).unwrap(), before);
}

fn session(id: &str, vectors: &[&[bool]]) -> SessionRecord {
    let turns = vectors
        .iter()
        .enumerate()
        .map(|(i, bits)| TurnRecord::new(i + 1, AdherenceVector::new(format!("{id}-{i}"), bits.to_vec()), ""))
        .collect();
    SessionRecord::new(id, "p", turns)
}

#[test]
fn single_turn_sessions_have_ssr_equal_to_isr() {
    let mut r = rng(20);
    let sessions: Vec<SessionRecord> = random_sessions(&mut r, 400)
        .into_iter()
        .map(|mut s| {
            s.turns.truncate(1);
            s
        })
        .collect();
    assert_eq!(ssr(&sessions).unwrap(), isr(&sessions).unwrap());
}

#[test]
fn declared_examples() {
    let (t, f) = (true, false);
    assert_eq!(csr(&[session("a", &[&[t, t, t, f]])]).unwrap(), 0.75);
    assert_eq!(isr(&[session("a", &[&[t, t], &[t, f]])]).unwrap(), 0.5);
    assert_eq!(ssr(&[session("a", &[&[t], &[t], &[f], &[t], &[t]])]).unwrap(), 0.4);
    assert_eq!(ssr(&[session("a", &[&[t], &[t]])]).unwrap(), 1.0);
    assert_eq!(ssr(&[session("a", &[&[f], &[t]])]).unwrap(), 0.0);
    let step = multi_if_accuracy(&[session("a", &[&[t, t]]), session("b", &[&[t, f]])], 1).unwrap();
    assert_eq!((step.prompt_strict, step.inst_strict), (0.5, 0.75));
    assert!(matches!(
        multi_if_accuracy(&[session("a", &[&[t]])], 2),
        Err(MetricsError::NoSuchStep(2))
    ));
    assert!(matches!(
        isr(&[session("a", &[&[]])]),
        Err(MetricsError::EmptySet { .. })
    ));
    assert!(matches!(csr(&[]), Err(MetricsError::EmptyCorpus)));
}
