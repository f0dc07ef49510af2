//! Tokenization rules shared by every checker.
//!
//! All metrics depend on these definitions, so they are fixed here and must
//! stay stable:
//!
//! * a **word** is a maximal run of non-whitespace characters;
//! * a **sentence** is a maximal run of text ended by one or more of `.`,
//!   `!` or `?`; a trailing fragment without a terminator still counts, and
//!   segments holding only whitespace do not;
//! * **keyword tokens** are maximal runs of alphanumeric characters, compared
//!   after lowercasing, so `"Duck,"` contains the token `duck`.

/// Characters that end a sentence.
pub const SENTENCE_TERMINATORS: [char; 3] = ['.', '!', '?'];

pub fn is_terminator(c: char) -> bool {
    SENTENCE_TERMINATORS.contains(&c)
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn sentence_count(text: &str) -> usize {
    text.split(is_terminator)
        .filter(|segment| segment.chars().any(|c| !c.is_whitespace()))
        .count()
}

/// Lowercased alphanumeric tokens in order of appearance.
pub fn keyword_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Number of (possibly overlapping) whole-token occurrences of `keyword` in
/// `text`, case-insensitive. A multi-token keyword matches a contiguous run
/// of tokens.
pub fn keyword_occurrences(text: &str, keyword: &str) -> usize {
    let needle = keyword_tokens(keyword);
    if needle.is_empty() {
        return 0;
    }
    let hay = keyword_tokens(text);
    if hay.len() < needle.len() {
        return 0;
    }
    hay.windows(needle.len()).filter(|w| *w == needle.as_slice()).count()
}

pub fn char_count(text: &str, needle: char) -> usize {
    text.chars().filter(|&c| c == needle).count()
}

/// True when the text contains no lowercase characters. The empty string and
/// caseless text (digits, punctuation) count as all caps.
pub fn is_all_caps(text: &str) -> bool {
    !text.chars().any(char::is_lowercase)
}

/// Prefix match after skipping leading whitespace. Case-sensitive.
pub fn starts_with(text: &str, prefix: &str) -> bool {
    text.trim_start().starts_with(prefix)
}

/// Suffix match after dropping trailing whitespace. Case-sensitive.
pub fn ends_with(text: &str, suffix: &str) -> bool {
    text.trim_end().ends_with(suffix)
}
