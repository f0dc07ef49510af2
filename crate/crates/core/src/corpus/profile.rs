//! System profiles: the persona-level instruction a session is built from.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::{Constraint, ConstraintKind, ConstraintSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemProfile {
    pub id: String,
    pub name: String,
    pub description: String,
    pub skills: Vec<String>,
    pub constraint_set: ConstraintSet,
}

pub const PREFIXES: &[&str] = &["NOTE:", "ANSWER:", "SUMMARY:", "UPDATE:", "TIP:"];
pub const SUFFIXES: &[&str] = &["CHEERS!", "THANKS!", "ENJOY!", "ONWARD!", "BRAVO!"];
pub const KEYWORDS: &[&str] = &[
    "budget", "deadline", "privacy", "recipe", "museum", "garden", "python", "galaxy", "harbor", "violin", "summit",
    "lantern",
];
pub const SPECIAL_CHARS: &[char] = &['#', '@', '%', '&', '*', '~'];

const MAX_KEYWORDS: usize = 4;
const MAX_CHARS: usize = 3;

const PERSONAS: &[(&str, &str, &[&str])] = &[
    (
        "Travel Planner",
        "Plans trips and itineraries.",
        &["itineraries", "budgets", "local tips"],
    ),
    (
        "Study Coach",
        "Helps students organize their learning.",
        &["schedules", "revision", "motivation"],
    ),
    (
        "Kitchen Helper",
        "Suggests recipes and cooking techniques.",
        &["recipes", "substitutions", "timing"],
    ),
    (
        "Code Mentor",
        "Explains programming concepts.",
        &["python", "debugging", "testing"],
    ),
    (
        "Fitness Guide",
        "Designs workout routines.",
        &["strength", "cardio", "recovery"],
    ),
    (
        "Museum Docent",
        "Describes exhibits and art history.",
        &["paintings", "sculpture", "history"],
    ),
];

/// One independently constrained feature of a response. A synthetic profile
/// never constrains the same feature twice, so every adherence pattern over
/// its constraints is realizable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Length,
    Sentences,
    Start,
    End,
    Caps,
    Keyword(usize),
    Char(usize),
}

fn all_dimensions() -> Vec<Dimension> {
    let mut dims = vec![
        Dimension::Length,
        Dimension::Sentences,
        Dimension::Start,
        Dimension::End,
        Dimension::Caps,
    ];
    dims.extend((0..MAX_KEYWORDS).map(Dimension::Keyword));
    dims.extend((0..MAX_CHARS).map(Dimension::Char));
    dims
}

/// Largest constraint count a synthetic profile supports.
pub fn max_synthetic_constraints() -> usize {
    all_dimensions().len()
}

/// Draws a synthetic profile with `size` constraints.
pub fn synthetic_profile<R: Rng + ?Sized>(id: &str, size: usize, rng: &mut R) -> ConstraintSet {
    let mut dims = all_dimensions();
    dims.shuffle(rng);
    dims.truncate(size);
    dims.sort_by_key(|d| all_dimensions().iter().position(|x| x == d));

    let mut keywords: Vec<&str> = KEYWORDS.to_vec();
    keywords.shuffle(rng);
    let mut chars: Vec<char> = SPECIAL_CHARS.to_vec();
    chars.shuffle(rng);

    let constraints = dims
        .into_iter()
        .map(|d| {
            let (cid, kind) = match d {
                Dimension::Length => {
                    let n = rng.gen_range(25..=61);
                    let kind = if rng.gen_bool(0.5) {
                        ConstraintKind::MaxWords(n)
                    } else {
                        ConstraintKind::MinWords(n)
                    };
                    ("len".to_string(), kind)
                }
                Dimension::Sentences => {
                    let kind = if rng.gen_bool(0.5) {
                        ConstraintKind::MaxSentences(rng.gen_range(1..=3))
                    } else {
                        ConstraintKind::MinSentences(rng.gen_range(2..=4))
                    };
                    ("sent".to_string(), kind)
                }
                Dimension::Start => {
                    let p = PREFIXES[rng.gen_range(0..PREFIXES.len())].to_string();
                    ("start".to_string(), ConstraintKind::StartsWith(p))
                }
                Dimension::End => {
                    let s = SUFFIXES[rng.gen_range(0..SUFFIXES.len())].to_string();
                    ("end".to_string(), ConstraintKind::EndsWith(s))
                }
                Dimension::Caps => {
                    let kind = if rng.gen_bool(0.5) {
                        ConstraintKind::AllCaps
                    } else {
                        ConstraintKind::NotAllCaps
                    };
                    ("caps".to_string(), kind)
                }
                Dimension::Keyword(i) => {
                    let keyword = keywords[i].to_string();
                    let kind = if rng.gen_bool(0.5) {
                        ConstraintKind::IncludeKeyword {
                            keyword,
                            min_count: rng.gen_range(1..=3),
                        }
                    } else {
                        ConstraintKind::ExcludeKeyword {
                            keyword,
                            max_count: rng.gen_range(0..=1),
                        }
                    };
                    (format!("kw{}", i + 1), kind)
                }
                Dimension::Char(i) => {
                    let ch = chars[i];
                    let kind = if rng.gen_bool(0.5) {
                        ConstraintKind::ContainsChar {
                            ch,
                            min_count: rng.gen_range(1..=3),
                        }
                    } else {
                        ConstraintKind::MaxChar {
                            ch,
                            max_count: rng.gen_range(0..=2),
                        }
                    };
                    (format!("ch{}", i + 1), kind)
                }
            };
            Constraint::new(cid, kind).expect("synthetic parameters are in range")
        })
        .collect();
    ConstraintSet::new(id, constraints).expect("dimension ids are unique")
}

/// Wraps a synthetic constraint set in a persona.
pub fn synthetic_system_profile<R: Rng + ?Sized>(id: &str, size: usize, rng: &mut R) -> SystemProfile {
    let (name, description, skills) = PERSONAS[rng.gen_range(0..PERSONAS.len())];
    SystemProfile {
        id: id.to_string(),
        name: name.to_string(),
        description: description.to_string(),
        skills: skills.iter().map(|s| s.to_string()).collect(),
        constraint_set: synthetic_profile(id, size, rng),
    }
}

const BUNDLED: &str = include_str!("fixtures/profiles.json");

/// The ten bundled fixture profiles.
pub fn bundled_profiles() -> Vec<SystemProfile> {
    serde_json::from_str(BUNDLED).expect("bundled profiles are valid")
}
