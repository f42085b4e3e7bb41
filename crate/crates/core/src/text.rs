//! Tokenization, span normalization and span location.
//!
//! Offsets on [`Token`] and [`CharRange`] count Unicode scalar values, not
//! bytes. Each token also carries its byte range so callers can slice the
//! sentence text without re-walking it.
//!
//! Splitting rules: whitespace separates tokens, and every quotation mark in
//! [`QUOTE_CHARS`] or punctuation mark in [`PUNCT_CHARS`] becomes a token of
//! its own. An apostrophe or period with a letter or digit on both sides is
//! kept inside its word, so `Pepper's` and `3.5` are single tokens while
//! `Sgt.` splits into `Sgt` and `.`.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Quotation marks stripped from span edges and split off as their own tokens.
pub const QUOTE_CHARS: [char; 8] = ['"', '\'', '“', '”', '‘', '’', '«', '»'];

/// Punctuation that always forms a single-character token.
pub const PUNCT_CHARS: [char; 13] = [
    '.', ',', ';', ':', '!', '?', '¿', '¡', '(', ')', '[', ']', '—',
];

pub fn is_quote(c: char) -> bool {
    QUOTE_CHARS.contains(&c)
}

pub fn is_punct(c: char) -> bool {
    PUNCT_CHARS.contains(&c)
}

fn is_split_char(c: char) -> bool {
    is_quote(c) || is_punct(c)
}

/// Apostrophes and periods survive inside a word when flanked by alphanumerics.
fn is_word_internal(chars: &[(usize, char)], i: usize) -> bool {
    let c = chars[i].1;
    if !matches!(c, '\'' | '’' | '.') || i == 0 || i + 1 >= chars.len() {
        return false;
    }
    chars[i - 1].1.is_alphanumeric() && chars[i + 1].1.is_alphanumeric()
}

/// Full Unicode default case folding.
pub fn casefold(s: &str) -> String {
    caseless::default_case_fold_str(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    /// Character offset of the first character.
    pub start: usize,
    /// Character offset one past the last character.
    pub end: usize,
    pub index: usize,
    pub bytes: Range<usize>,
}

impl Token {
    /// True when the token is a single quotation mark.
    pub fn is_quote(&self) -> bool {
        let mut chars = self.surface.chars();
        matches!((chars.next(), chars.next()), (Some(c), None) if is_quote(c))
    }

    /// True when the token is a single quote or punctuation mark.
    pub fn is_punctuation(&self) -> bool {
        let mut chars = self.surface.chars();
        matches!((chars.next(), chars.next()), (Some(c), None) if is_split_char(c))
    }
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;

    let push = |tokens: &mut Vec<Token>, from: usize, to: usize| {
        let byte_start = chars[from].0;
        let byte_end = chars.get(to).map_or(text.len(), |&(b, _)| b);
        tokens.push(Token {
            surface: text[byte_start..byte_end].to_string(),
            start: from,
            end: to,
            index: tokens.len(),
            bytes: byte_start..byte_end,
        });
    };

    for i in 0..chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            if let Some(s) = word_start.take() {
                push(&mut tokens, s, i);
            }
        } else if is_split_char(c) && !is_word_internal(&chars, i) {
            if let Some(s) = word_start.take() {
                push(&mut tokens, s, i);
            }
            push(&mut tokens, i, i + 1);
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        push(&mut tokens, s, chars.len());
    }
    tokens
}

/// Half-open character range, `start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Option<Self> {
        (start < end).then_some(CharRange { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

impl fmt::Display for CharRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Half-open range of token indices into a [`Sentence`]. The first and last
/// tokens of a located span are never quote tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenRange {
    pub start: usize,
    pub end: usize,
}

impl TokenRange {
    pub fn overlaps(&self, other: &TokenRange) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &TokenRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn indices(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    id: String,
    text: String,
    tokens: Vec<Token>,
    folded: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        let folded = tokens.iter().map(|t| casefold(&t.surface)).collect();
        Sentence {
            id: id.into(),
            text,
            tokens,
            folded,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Casefolded token surfaces, aligned with [`Sentence::tokens`].
    pub fn folded_tokens(&self) -> &[String] {
        &self.folded
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn char_range(&self, range: TokenRange) -> CharRange {
        CharRange {
            start: self.tokens[range.start].start,
            end: self.tokens[range.end - 1].end,
        }
    }

    /// Text covered by a token range, including any interior quote tokens.
    pub fn token_text(&self, range: TokenRange) -> &str {
        let from = self.tokens[range.start].bytes.start;
        let to = self.tokens[range.end - 1].bytes.end;
        &self.text[from..to]
    }

    pub fn slice(&self, range: CharRange) -> &str {
        let byte_at = |ch: usize| {
            self.text
                .char_indices()
                .nth(ch)
                .map_or(self.text.len(), |(b, _)| b)
        };
        &self.text[byte_at(range.start)..byte_at(range.end)]
    }

    /// Positions of the non-quote tokens, in order.
    pub fn content_indices(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .filter(|t| !t.is_quote())
            .map(|t| t.index)
            .collect()
    }
}

/// A span value that is quote-free at both ends, whitespace-collapsed,
/// casefolded and non-empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormalizedSpan(String);

impl NormalizedSpan {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NormalizedSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedSpan {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Strips quotation marks and whitespace from both ends, collapses inner
/// whitespace runs to one space and casefolds the rest.
pub fn normalize_span(raw: &str) -> Result<NormalizedSpan> {
    let trimmed = raw.trim_matches(|c: char| is_quote(c) || c.is_whitespace());
    if trimmed.is_empty() {
        return Err(Error::EmptySpan {
            raw: raw.to_string(),
        });
    }
    let collapsed = trimmed.split_whitespace().collect::<Vec<_>>().join(" ");
    Ok(NormalizedSpan(casefold(&collapsed)))
}

/// The casefolded non-quote tokens of `text`. Two surfaces with equal keys
/// denote the same span for location and lexicon lookup.
pub fn span_key(text: &str) -> Vec<String> {
    tokenize(text)
        .iter()
        .filter(|t| !t.is_quote())
        .map(|t| casefold(&t.surface))
        .collect()
}

/// Every occurrence of `key` in the sentence as a token range. Quote tokens
/// between matched tokens are skipped.
pub fn locate_key(sentence: &Sentence, key: &[String]) -> Vec<TokenRange> {
    if key.is_empty() {
        return Vec::new();
    }
    let folded = sentence.folded_tokens();
    let content = sentence.content_indices();
    let mut found = Vec::new();
    for w in content.windows(key.len()) {
        if w.iter().zip(key).all(|(&i, k)| &folded[i] == k) {
            found.push(TokenRange {
                start: w[0],
                end: w[key.len() - 1] + 1,
            });
        }
    }
    found
}

pub fn locate_tokens(sentence: &Sentence, span: &str) -> Vec<TokenRange> {
    locate_key(sentence, &span_key(span))
}

/// Every occurrence of `span` in the sentence, matched casefold-insensitively
/// on token boundaries, ordered by start.
pub fn locate_span(sentence: &Sentence, span: &str) -> Vec<CharRange> {
    locate_tokens(sentence, span)
        .into_iter()
        .map(|r| sentence.char_range(r))
        .collect()
}

/// Gives each span its earliest occurrence not already taken by an earlier
/// span in the list. `None` marks spans with no free occurrence.
pub fn assign_occurrences<'a>(
    sentence: &Sentence,
    spans: impl IntoIterator<Item = &'a str>,
) -> Vec<Option<TokenRange>> {
    let mut taken: Vec<TokenRange> = Vec::new();
    spans
        .into_iter()
        .map(|span| {
            let pick = locate_tokens(sentence, span)
                .into_iter()
                .find(|r| !taken.contains(r));
            if let Some(r) = pick {
                taken.push(r);
            }
            pick
        })
        .collect()
}
