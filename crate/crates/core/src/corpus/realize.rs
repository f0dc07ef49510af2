//! Template realizer: builds a response text that meets a list of target
//! constraints exactly.
//!
//! A response is a sequence of sentences made of tokens: an optional prefix
//! token, keyword tokens, character tokens, lowercase filler words and an
//! optional suffix token. Every target is reduced to bounds on one feature
//! (word count, sentence count, per-keyword count, per-character count,
//! start, end, capitalization), the bounds are intersected, and the smallest
//! consistent token plan is rendered. The rendered text is always re-checked,
//! so a plan that the layout cannot honor is reported instead of emitted.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::constraint::{Constraint, ConstraintKind};
use crate::text;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unsatisfiable template: {0}")]
pub struct UnsatisfiableTemplate(pub String);

/// Lowercase filler vocabulary. None of these words is a bundled keyword.
pub const FILLER_WORDS: &[&str] = &[
    "the", "plan", "looks", "steady", "and", "we", "can", "share", "more", "notes", "about", "this", "topic", "today",
    "with", "care", "every", "small", "step", "counts", "so", "keep", "going", "while", "ideas", "grow", "over",
    "time", "here", "is", "a", "clear", "view", "of", "what", "matters", "most", "for", "you",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Bounds {
    lo: usize,
    hi: usize,
}

impl Bounds {
    const ANY: Bounds = Bounds { lo: 0, hi: usize::MAX };

    fn at_least(n: usize) -> Self {
        Self { lo: n, hi: usize::MAX }
    }

    fn at_most(n: usize) -> Self {
        Self { lo: 0, hi: n }
    }

    fn meet(self, other: Bounds) -> Bounds {
        Bounds {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    fn is_empty(self) -> bool {
        self.lo > self.hi
    }
}

/// Feature bounds implied by a list of target constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPlan {
    words: Bounds,
    sentences: Bounds,
    keywords: BTreeMap<String, Bounds>,
    chars: BTreeMap<char, Bounds>,
    prefix: Option<String>,
    forbidden_prefixes: Vec<String>,
    suffix: Option<String>,
    forbidden_suffixes: Vec<String>,
    all_caps: Option<bool>,
    /// Lowercased tokens of every keyword the targets mention.
    reserved: Vec<String>,
}

/// Keeps the more specific of two required affixes; `extends(long, short)`
/// says whether `long` implies `short`.
fn merge_affix(
    slot: &mut Option<String>,
    value: &str,
    extends: fn(&str, &str) -> bool,
) -> Result<(), UnsatisfiableTemplate> {
    match slot {
        None => *slot = Some(value.to_string()),
        Some(cur) if extends(cur, value) => {}
        Some(cur) if extends(value, cur) => *slot = Some(value.to_string()),
        Some(cur) => {
            return Err(UnsatisfiableTemplate(format!(
                "affixes '{cur}' and '{value}' are incompatible"
            )))
        }
    }
    Ok(())
}

impl TextPlan {
    /// Intersects the feature bounds of every target constraint.
    pub fn new<'a>(targets: impl IntoIterator<Item = &'a ConstraintKind>) -> Result<Self, UnsatisfiableTemplate> {
        let mut plan = TextPlan {
            words: Bounds::ANY,
            sentences: Bounds::ANY,
            keywords: BTreeMap::new(),
            chars: BTreeMap::new(),
            prefix: None,
            forbidden_prefixes: Vec::new(),
            suffix: None,
            forbidden_suffixes: Vec::new(),
            all_caps: None,
            reserved: Vec::new(),
        };
        for kind in targets {
            plan.add(kind)?;
        }
        plan.check_bounds()?;
        Ok(plan)
    }

    /// Plan for satisfying `constraints[i]` exactly when `pattern[i]` holds.
    pub fn for_pattern(constraints: &[Constraint], pattern: &[bool]) -> Result<Self, UnsatisfiableTemplate> {
        if constraints.len() != pattern.len() {
            return Err(UnsatisfiableTemplate(
                "pattern length differs from constraint count".into(),
            ));
        }
        let targets: Vec<ConstraintKind> = constraints
            .iter()
            .zip(pattern)
            .map(|(c, &keep)| if keep { c.kind.clone() } else { c.kind.negate() })
            .collect();
        Self::new(&targets)
    }

    fn add(&mut self, kind: &ConstraintKind) -> Result<(), UnsatisfiableTemplate> {
        use ConstraintKind as K;
        match kind {
            K::MaxWords(n) => self.words = self.words.meet(Bounds::at_most(*n)),
            K::MinWords(n) => self.words = self.words.meet(Bounds::at_least(*n)),
            K::MaxSentences(n) => self.sentences = self.sentences.meet(Bounds::at_most(*n)),
            K::MinSentences(n) => self.sentences = self.sentences.meet(Bounds::at_least(*n)),
            K::IncludeKeyword { keyword, min_count } => self.keyword(keyword, Bounds::at_least(*min_count)),
            K::ExcludeKeyword { keyword, max_count } => self.keyword(keyword, Bounds::at_most(*max_count)),
            K::ContainsChar { ch, min_count } => {
                let b = self.chars.entry(*ch).or_insert(Bounds::ANY);
                *b = b.meet(Bounds::at_least(*min_count));
            }
            K::MaxChar { ch, max_count } => {
                let b = self.chars.entry(*ch).or_insert(Bounds::ANY);
                *b = b.meet(Bounds::at_most(*max_count));
            }
            K::StartsWith(p) => merge_affix(&mut self.prefix, p, |long, short| long.starts_with(short))?,
            K::NotStartsWith(p) => self.forbidden_prefixes.push(p.clone()),
            K::EndsWith(s) => merge_affix(&mut self.suffix, s, |long, short| long.ends_with(short))?,
            K::NotEndsWith(s) => self.forbidden_suffixes.push(s.clone()),
            K::AllCaps | K::NotAllCaps => {
                let want = matches!(kind, K::AllCaps);
                if self.all_caps.is_some_and(|cur| cur != want) {
                    return Err(UnsatisfiableTemplate("both all caps and not all caps".into()));
                }
                self.all_caps = Some(want);
            }
        }
        Ok(())
    }

    fn keyword(&mut self, keyword: &str, bounds: Bounds) {
        let key = text::keyword_tokens(keyword).join(" ");
        self.reserved.extend(text::keyword_tokens(keyword));
        let b = self.keywords.entry(key).or_insert(Bounds::ANY);
        *b = b.meet(bounds);
    }

    fn check_bounds(&self) -> Result<(), UnsatisfiableTemplate> {
        let empty = |what: &str| Err(UnsatisfiableTemplate(format!("no admissible {what}")));
        if self.words.is_empty() {
            return empty("word count");
        }
        if self.sentences.is_empty() || self.sentences.hi == 0 {
            return empty("sentence count");
        }
        if let Some((k, _)) = self.keywords.iter().find(|(_, b)| b.is_empty()) {
            return empty(&format!("count for keyword '{k}'"));
        }
        if let Some((c, _)) = self.chars.iter().find(|(_, b)| b.is_empty()) {
            return empty(&format!("count for character '{c}'"));
        }
        if let Some(p) = &self.prefix {
            if let Some(f) = self.forbidden_prefixes.iter().find(|f| p.starts_with(f.as_str())) {
                return Err(UnsatisfiableTemplate(format!("prefix '{p}' is forbidden by '{f}'")));
            }
        }
        if let Some(s) = &self.suffix {
            if let Some(f) = self.forbidden_suffixes.iter().find(|f| s.ends_with(f.as_str())) {
                return Err(UnsatisfiableTemplate(format!("suffix '{s}' is forbidden by '{f}'")));
            }
        }
        Ok(())
    }

    /// Renders the smallest text meeting the plan, with filler words chosen
    /// by `rng` and up to `slack` extra filler words when the word bound
    /// allows it.
    pub fn render<R: Rng + ?Sized>(&self, rng: &mut R, slack: usize) -> Result<String, UnsatisfiableTemplate> {
        let fillers: Vec<&str> = FILLER_WORDS
            .iter()
            .copied()
            .filter(|w| !self.reserved.iter().any(|r| r == w))
            .collect();
        if fillers.is_empty() {
            return Err(UnsatisfiableTemplate(
                "every filler word is a constrained keyword".into(),
            ));
        }

        let mut items: Vec<String> = Vec::new();
        for (keyword, b) in &self.keywords {
            items.extend(std::iter::repeat_n(keyword.clone(), b.lo));
        }
        for (ch, b) in &self.chars {
            items.extend(std::iter::repeat_n(ch.to_string(), b.lo));
        }
        items.shuffle(rng);
        let item_words: usize = items.iter().map(|i| text::word_count(i)).sum();
        let affix_words =
            self.prefix.as_deref().map_or(0, text::word_count) + self.suffix.as_deref().map_or(0, text::word_count);

        let sentences = self.sentences.lo.max(1);
        let caps_needs_filler =
            self.all_caps == Some(false) && !items.iter().any(|i| i.chars().any(char::is_lowercase));
        let fixed = item_words + affix_words;
        let fixed_tokens = items.len() + usize::from(self.prefix.is_some()) + usize::from(self.suffix.is_some());
        // Fillers give every sentence a token and supply the lowercase letter
        // that "not all caps" needs.
        let min_fillers = sentences
            .saturating_sub(fixed_tokens)
            .max(usize::from(caps_needs_filler))
            .max(1);
        let min_words = fixed + min_fillers;
        let words = min_words.max(self.words.lo);
        if words > self.words.hi {
            return Err(UnsatisfiableTemplate(format!(
                "needs at least {words} words but at most {} are allowed",
                self.words.hi
            )));
        }
        let room = (self.words.hi - words).min(slack);
        let words = words + if room > 0 { rng.gen_range(0..=room) } else { 0 };
        let n_fillers = words - fixed;

        // Interleave fillers between items, then pad with the rest.
        let mut body: Vec<String> = Vec::with_capacity(items.len() + n_fillers);
        let filler = |rng: &mut R| fillers[rng.gen_range(0..fillers.len())].to_string();
        let mut left = n_fillers;
        for item in items {
            if left > 0 {
                body.push(filler(rng));
                left -= 1;
            }
            body.push(item);
        }
        for _ in 0..left {
            body.push(filler(rng));
        }
        if self.all_caps == Some(true) {
            for t in &mut body {
                *t = t.to_uppercase();
            }
        }

        // Split body + affixes into sentences of near-equal length.
        let mut tokens: Vec<String> = Vec::new();
        tokens.extend(self.prefix.clone());
        tokens.extend(body);
        let suffix_at_end = self.suffix.is_some();
        tokens.extend(self.suffix.clone());
        let n = tokens.len();
        let mut out = String::new();
        for s in 0..sentences {
            let (a, b) = (s * n / sentences, (s + 1) * n / sentences);
            let mut sentence = tokens[a..b].join(" ");
            let last = s + 1 == sentences;
            if !(last && suffix_at_end) {
                sentence.push('.');
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&sentence);
        }
        Ok(out)
    }
}

/// Realizes a response whose adherence to `constraints` equals `pattern`,
/// verified by running every checker.
pub fn realize<R: Rng + ?Sized>(
    constraints: &[Constraint],
    pattern: &[bool],
    rng: &mut R,
    slack: usize,
) -> Result<String, UnsatisfiableTemplate> {
    let plan = TextPlan::for_pattern(constraints, pattern)?;
    let text = plan.render(rng, slack)?;
    for (c, &want) in constraints.iter().zip(pattern) {
        if c.check(&text) != want {
            return Err(UnsatisfiableTemplate(format!(
                "layout cannot honor [{}] = {want} (rendered {text:?})",
                c.id
            )));
        }
    }
    Ok(text)
}
