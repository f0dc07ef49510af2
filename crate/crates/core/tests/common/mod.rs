//! Shared generators and independent oracles for the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rpo_core::adherence::AdherenceVector;
use rpo_core::corpus::profile::synthetic_profile;
use rpo_core::corpus::realize::realize;
use rpo_core::corpus::{generate_corpus, instruction_samples, AdherenceModel, CountRange, GenConfig};
use rpo_core::metrics::{SessionRecord, TurnRecord};
use rpo_core::pairs::InstructionSamples;
use rpo_core::{Constraint, ConstraintKind, ConstraintSet, ScoredResponse};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const KEYWORDS: &[&str] = &["duck", "river", "Blue sky", "x1", "café"];
const AFFIXES: &[&str] = &["Hi", "NOTE:", "!", "Bye.", "ok", "é"];
const CHARS: &[char] = &['#', '@', 'a', '!', 'é'];
const TOKENS: &[&str] = &[
    "duck", "DUCK", "Duck,", "ducks", "river.", "blue", "Sky", "sky!", "x1", "X1?", "café", "CAFÉ", "hi", "Hi",
    "NOTE:", "ok", "Bye.", "#", "@@", "a", "...", "?!", "é", "word", "two-part", "42", "—",
];
const SPACES: &[&str] = &[" ", "  ", "\t", "\n", " \n "];

/// A random constraint kind covering all fourteen predicates, with small
/// parameters so both verdicts occur often.
pub fn random_kind<R: Rng + ?Sized>(rng: &mut R) -> ConstraintKind {
    let keyword = KEYWORDS[rng.gen_range(0..KEYWORDS.len())].to_string();
    let affix = AFFIXES[rng.gen_range(0..AFFIXES.len())].to_string();
    let ch = CHARS[rng.gen_range(0..CHARS.len())];
    match rng.gen_range(0..14) {
        0 => ConstraintKind::MaxWords(rng.gen_range(0..8)),
        1 => ConstraintKind::MinWords(rng.gen_range(1..8)),
        2 => ConstraintKind::IncludeKeyword {
            keyword,
            min_count: rng.gen_range(1..3),
        },
        3 => ConstraintKind::ExcludeKeyword {
            keyword,
            max_count: rng.gen_range(0..2),
        },
        4 => ConstraintKind::StartsWith(affix),
        5 => ConstraintKind::NotStartsWith(affix),
        6 => ConstraintKind::EndsWith(affix),
        7 => ConstraintKind::NotEndsWith(affix),
        8 => ConstraintKind::MaxSentences(rng.gen_range(0..4)),
        9 => ConstraintKind::MinSentences(rng.gen_range(1..4)),
        10 => ConstraintKind::AllCaps,
        11 => ConstraintKind::NotAllCaps,
        12 => ConstraintKind::ContainsChar {
            ch,
            min_count: rng.gen_range(1..4),
        },
        _ => ConstraintKind::MaxChar {
            ch,
            max_count: rng.gen_range(0..3),
        },
    }
}

pub fn random_constraint<R: Rng + ?Sized>(rng: &mut R, id: &str) -> Constraint {
    Constraint::new(id, random_kind(rng)).expect("generated parameters are valid")
}

/// A random response mixing keywords, affixes, punctuation, case and
/// whitespace variants. Empty responses occur too.
pub fn random_response<R: Rng + ?Sized>(rng: &mut R) -> String {
    let n = rng.gen_range(0..10);
    let mut out = String::new();
    if rng.gen_bool(0.2) {
        out.push_str(SPACES[rng.gen_range(0..SPACES.len())]);
    }
    for i in 0..n {
        if i > 0 {
            out.push_str(SPACES[rng.gen_range(0..SPACES.len())]);
        }
        out.push_str(TOKENS[rng.gen_range(0..TOKENS.len())]);
    }
    if rng.gen_bool(0.5) {
        out = out.to_uppercase();
    }
    out
}

/// Reference checker written against the tokenization rules directly,
/// character by character.
pub fn oracle_check(kind: &ConstraintKind, text: &str) -> bool {
    let words = {
        let mut count = 0;
        let mut inside = false;
        for c in text.chars() {
            if c.is_whitespace() {
                inside = false;
            } else if !inside {
                inside = true;
                count += 1;
            }
        }
        count
    };
    let sentences = {
        let mut count = 0;
        let mut content = false;
        for c in text.chars() {
            if c == '.' || c == '!' || c == '?' {
                if content {
                    count += 1;
                }
                content = false;
            } else if !c.is_whitespace() {
                content = true;
            }
        }
        count + usize::from(content)
    };
    let tokens = |s: &str| -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in s.chars() {
            if c.is_alphanumeric() {
                cur.extend(c.to_lowercase());
            } else if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    };
    let occurrences = |kw: &str| -> usize {
        let needle = tokens(kw);
        let hay = tokens(text);
        (0..hay.len())
            .filter(|&i| i + needle.len() <= hay.len() && hay[i..i + needle.len()] == needle[..])
            .count()
    };
    let chars = |ch: char| text.chars().filter(|&c| c == ch).count();
    let trimmed_start: String = text.chars().skip_while(|c| c.is_whitespace()).collect();
    let trimmed_end: String = {
        let v: Vec<char> = text.chars().collect();
        let end = v.iter().rposition(|c| !c.is_whitespace()).map_or(0, |i| i + 1);
        v[..end].iter().collect()
    };
    let all_caps = text.chars().all(|c| !c.is_lowercase());
    match kind {
        ConstraintKind::MaxWords(n) => words <= *n,
        ConstraintKind::MinWords(n) => words >= *n,
        ConstraintKind::IncludeKeyword { keyword, min_count } => occurrences(keyword) >= *min_count,
        ConstraintKind::ExcludeKeyword { keyword, max_count } => occurrences(keyword) <= *max_count,
        ConstraintKind::StartsWith(s) => trimmed_start.starts_with(s.as_str()),
        ConstraintKind::NotStartsWith(s) => !trimmed_start.starts_with(s.as_str()),
        ConstraintKind::EndsWith(s) => trimmed_end.ends_with(s.as_str()),
        ConstraintKind::NotEndsWith(s) => !trimmed_end.ends_with(s.as_str()),
        ConstraintKind::MaxSentences(n) => sentences <= *n,
        ConstraintKind::MinSentences(n) => sentences >= *n,
        ConstraintKind::AllCaps => all_caps,
        ConstraintKind::NotAllCaps => !all_caps,
        ConstraintKind::ContainsChar { ch, min_count } => chars(*ch) >= *min_count,
        ConstraintKind::MaxChar { ch, max_count } => chars(*ch) <= *max_count,
    }
}

/// Vector over constraints `A, B, C, ...` following exactly the named ones.
pub fn follows(set_id: &str, k: usize, names: &str) -> AdherenceVector {
    let bits = (0..k).map(|i| names.contains((b'A' + i as u8) as char)).collect();
    AdherenceVector::new(set_id, bits)
}

/// A synthetic instruction with `k` constraints.
pub fn instruction<R: Rng + ?Sized>(rng: &mut R, id: &str, k: usize) -> ConstraintSet {
    synthetic_profile(id, k, rng)
}

/// A response realizing `pattern` under `cs`.
pub fn response_for<R: Rng + ?Sized>(rng: &mut R, cs: &ConstraintSet, pattern: &[bool]) -> ScoredResponse {
    let text = realize(&cs.constraints, pattern, rng, 4).expect("synthetic patterns are realizable");
    let r = ScoredResponse::evaluate(cs, text, "test");
    assert_eq!(r.adherence.bits, pattern);
    r
}

pub fn random_pattern<R: Rng + ?Sized>(rng: &mut R, k: usize, p: f64) -> Vec<bool> {
    (0..k).map(|_| rng.gen_bool(p)).collect()
}

/// Random sessions with 1 to 5 turns of 1 to 8 constraints each.
pub fn random_sessions<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<SessionRecord> {
    (0..n)
        .map(|s| {
            let p = rng.gen_range(0.3..1.0);
            let turns = (1..=rng.gen_range(1..=5))
                .map(|t| {
                    let k = rng.gen_range(1..=8);
                    let v = AdherenceVector::new(format!("s{s}-t{t}"), (0..k).map(|_| rng.gen_bool(p)).collect());
                    TurnRecord::new(t, v, "")
                })
                .collect();
            SessionRecord::new(format!("s{s}"), "p", turns)
        })
        .collect()
}

/// Generated corpus: `sessions` sessions of `turns` turns, `k` constraints
/// per turn, five samples per turn under Bernoulli(`p`) adherence.
pub fn generated_corpus(sessions: usize, turns: usize, k: usize, p: f64, seed: u64) -> Vec<SessionRecord> {
    let mut cfg = GenConfig::new(sessions, turns, seed);
    cfg.constraints_per_turn = CountRange { min: k, max: k };
    cfg.adherence = AdherenceModel::Bernoulli { p };
    generate_corpus(&cfg).expect("generator config is valid").sessions
}

/// Per-turn sample groups of a generated corpus.
pub fn generated_samples(sessions: usize, turns: usize, k: usize, p: f64, seed: u64) -> Vec<InstructionSamples> {
    instruction_samples(&generated_corpus(sessions, turns, k, p, seed)).expect("generated sessions are aligned")
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact fraction `num / den` rounded once to `f64`.
fn exact(num: u64, den: u64) -> f64 {
    let d = gcd(num, den).max(1);
    (num / d) as f64 / (den / d) as f64
}

pub struct MetricsOracle {
    pub csr: f64,
    pub isr: f64,
    pub ssr: f64,
    pub per_step: Vec<(f64, f64)>,
}

/// Brute-force recount. Sessions here have at most five turns of at most
/// eight constraints, so per-session fractions have denominators dividing 60
/// and per-turn fractions denominators dividing 840.
pub fn metrics_oracle(sessions: &[SessionRecord]) -> MetricsOracle {
    let (mut csr_num, mut perfect, mut turns) = (0u64, 0u64, 0u64);
    let mut ssr_num = 0u64;
    let max_turns = sessions.iter().map(|s| s.turns.len()).max().unwrap();
    let mut steps = vec![(0u64, 0u64, 0u64, 0u64); max_turns];
    for s in sessions {
        let mut prefix = 0u64;
        let mut broken = false;
        for (i, t) in s.turns.iter().enumerate() {
            let ones = t.adherence.bits.iter().filter(|b| **b).count() as u64;
            let len = t.adherence.bits.len() as u64;
            let all = ones == len;
            csr_num += ones * (840 / len);
            turns += 1;
            perfect += u64::from(all);
            if all && !broken {
                prefix += 1;
            } else {
                broken = true;
            }
            let st = &mut steps[i];
            st.0 += u64::from(all);
            st.1 += 1;
            st.2 += ones;
            st.3 += len;
        }
        ssr_num += prefix * (60 / s.turns.len() as u64);
    }
    MetricsOracle {
        csr: exact(csr_num, 840 * turns),
        isr: exact(perfect, turns),
        ssr: exact(ssr_num, 60 * sessions.len() as u64),
        per_step: steps.iter().map(|s| (exact(s.0, s.1), exact(s.2, s.3))).collect(),
    }
}

/// Constraints A..F driven by marker words: A-D and F need their marker,
/// E forbids its marker.
pub fn six() -> ConstraintSet {
    let cs = "ABCDEF"
        .chars()
        .map(|l| {
            let keyword = format!("m{l}");
            let kind = if l == 'E' {
                ConstraintKind::ExcludeKeyword { keyword, max_count: 0 }
            } else {
                ConstraintKind::IncludeKeyword { keyword, min_count: 1 }
            };
            Constraint::new(l.to_string(), kind).unwrap()
        })
        .collect();
    ConstraintSet::new("turn", cs).unwrap()
}

pub fn following(cs: &ConstraintSet, letters: &str) -> ScoredResponse {
    let words: Vec<String> = "ABCDEF"
        .chars()
        .filter(|&l| letters.contains(l) != (l == 'E'))
        .map(|l| format!("m{l}"))
        .collect();
    let r = ScoredResponse::evaluate(cs, format!("reply {}", words.join(" ")), "");
    assert_eq!(
        r.adherence.bits,
        "ABCDEF".chars().map(|l| letters.contains(l)).collect::<Vec<_>>()
    );
    r
}
