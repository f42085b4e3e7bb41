//! Gazetteer detector.
//!
//! Tokens are scanned left to right. At each position the longest gazetteer
//! phrase (up to `max_phrase_tokens`) matching the casefolded tokens is
//! taken and the scan resumes after it; quote tokens are transparent to
//! matching. Matches lying wholly inside an occurrence of an excluded phrase
//! (typically a named entity) are skipped.
//!
//! Entries flagged `ambiguous` are also ordinary Spanish words (`red`,
//! `pie`). When `require_context_for_ambiguous` is set they fire only with
//! one of these cues:
//!
//! * quotes: the match is immediately enclosed in quote tokens;
//! * adjacency: it touches a non-ambiguous match;
//! * capitalization: it starts with an uppercase letter away from the start
//!   of a sentence that is neither all caps nor title cased.
//!
//! A match is never widened to the quoted region around it. Widening helps
//! on text where quotes mark only borrowings but turns quoted titles such as
//! `“Sgt. Pepper's Lonely Hearts Club Band”` into one long false positive.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use rayon::prelude::*;

use crate::corpus::{AnnotatedSentence, SpanAnnotation};
use crate::error::{Error, Result};
use crate::text::{normalize_span, span_key, NormalizedSpan, Sentence, TokenRange};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub phrase: NormalizedSpan,
    pub ambiguous: bool,
}

/// Phrase lexicon keyed by casefolded token sequence.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: HashMap<Vec<String>, GazetteerEntry>,
    exclusions: HashSet<Vec<String>>,
    longest_entry: usize,
    longest_exclusion: usize,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a phrase; re-adding merges the ambiguous flags with OR.
    pub fn insert(&mut self, phrase: &str, ambiguous: bool) -> Result<()> {
        let phrase = normalize_span(phrase)?;
        let key = span_key(phrase.as_str());
        if key.is_empty() {
            return Err(Error::EmptySpan {
                raw: phrase.into_string(),
            });
        }
        self.longest_entry = self.longest_entry.max(key.len());
        self.entries
            .entry(key)
            .and_modify(|e| e.ambiguous |= ambiguous)
            .or_insert(GazetteerEntry { phrase, ambiguous });
        Ok(())
    }

    pub fn exclude(&mut self, phrase: &str) -> Result<()> {
        let key = span_key(normalize_span(phrase)?.as_str());
        if key.is_empty() {
            return Err(Error::EmptySpan {
                raw: phrase.to_string(),
            });
        }
        self.longest_exclusion = self.longest_exclusion.max(key.len());
        self.exclusions.insert(key);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ambiguous_count(&self) -> usize {
        self.entries.values().filter(|e| e.ambiguous).count()
    }

    pub fn exclusion_count(&self) -> usize {
        self.exclusions.len()
    }

    pub fn get(&self, phrase: &str) -> Option<&GazetteerEntry> {
        self.entries.get(&span_key(phrase))
    }

    pub fn entries(&self) -> impl Iterator<Item = &GazetteerEntry> {
        self.entries.values()
    }
}

/// Reads a gazetteer (`phrase` or `phrase<TAB>ambiguous` per line) and an
/// exclusion list (one phrase per line). Blank lines are ignored.
pub fn load_gazetteer<E: BufRead, X: BufRead>(entries: E, exclusions: X) -> Result<Gazetteer> {
    let mut gaz = Gazetteer::new();
    gaz.read_entries(entries)?;
    gaz.read_exclusions(exclusions)?;
    Ok(gaz)
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(n, line)| match line {
            Err(e) => Some(Err(e.into())),
            Ok(l) => {
                let l = l.trim_start_matches('\u{feff}').trim_end_matches('\r');
                (!l.trim().is_empty()).then(|| Ok((n + 1, l.to_string())))
            }
        })
}

impl Gazetteer {
    /// Adds `phrase` or `phrase<TAB>ambiguous` lines.
    pub fn read_entries<R: BufRead>(&mut self, reader: R) -> Result<()> {
        for item in content_lines(reader) {
            let (n, line) = item?;
            let mut fields = line.split('\t');
            let phrase = fields.next().unwrap_or_default();
            let ambiguous = match (fields.next().map(str::trim), fields.next()) {
                (None, _) => false,
                (Some("ambiguous"), None) => true,
                (Some(""), None) => false,
                (Some(flag), None) => {
                    return Err(Error::malformed(n, format!("unknown flag {flag:?}")))
                }
                (Some(_), Some(_)) => return Err(Error::malformed(n, "too many fields")),
            };
            self.insert(phrase, ambiguous)
                .map_err(|_| Error::malformed(n, "empty phrase"))?;
        }
        Ok(())
    }

    /// Adds one exclusion phrase per line.
    pub fn read_exclusions<R: BufRead>(&mut self, reader: R) -> Result<()> {
        for item in content_lines(reader) {
            let (n, line) = item?;
            if line.contains('\t') {
                return Err(Error::malformed(n, "exclusions take one phrase per line"));
            }
            self.exclude(&line)
                .map_err(|_| Error::malformed(n, "empty phrase"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triggers {
    pub quotes: bool,
    pub adjacency: bool,
    pub capitalization: bool,
}

impl Default for Triggers {
    fn default() -> Self {
        Triggers {
            quotes: true,
            adjacency: true,
            capitalization: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleConfig {
    pub require_context_for_ambiguous: bool,
    pub use_exclusions: bool,
    pub max_phrase_tokens: usize,
    pub triggers: Triggers,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            require_context_for_ambiguous: true,
            use_exclusions: true,
            max_phrase_tokens: 5,
            triggers: Triggers::default(),
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_phrase_tokens == 0 {
            return Err(Error::InvalidConfig(
                "max_phrase_tokens must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

struct Candidate {
    /// Position in the content-token sequence.
    start: usize,
    len: usize,
    ambiguous: bool,
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

fn is_all_caps(sentence: &Sentence) -> bool {
    let mut letters = sentence
        .text()
        .chars()
        .filter(|c| c.is_alphabetic())
        .peekable();
    letters.peek().is_some() && letters.all(|c| !c.is_lowercase())
}

fn is_title_cased(sentence: &Sentence) -> bool {
    let words: Vec<&str> = sentence
        .tokens()
        .iter()
        .map(|t| t.surface.as_str())
        .filter(|s| s.chars().next().is_some_and(char::is_alphabetic))
        .collect();
    words.len() >= 2 && words.iter().all(|w| starts_upper(w))
}

pub fn detect(sentence: &Sentence, gaz: &Gazetteer, cfg: &RuleConfig) -> Vec<SpanAnnotation> {
    let content = sentence.content_indices();
    let folded: Vec<String> = content
        .iter()
        .map(|&i| sentence.folded_tokens()[i].clone())
        .collect();

    let mut excluded: Vec<(usize, usize)> = Vec::new();
    if cfg.use_exclusions && !gaz.exclusions.is_empty() {
        for i in 0..folded.len() {
            for n in 1..=gaz.longest_exclusion.min(folded.len() - i) {
                if gaz.exclusions.contains(&folded[i..i + n]) {
                    excluded.push((i, i + n));
                }
            }
        }
    }
    let inside_exclusion = |s: usize, e: usize| excluded.iter().any(|&(a, b)| a <= s && e <= b);

    let longest = cfg.max_phrase_tokens.min(gaz.longest_entry);
    let mut cands: Vec<Candidate> = Vec::new();
    let mut i = 0;
    while i < folded.len() {
        let found = (1..=longest.min(folded.len() - i)).rev().find_map(|n| {
            let entry = gaz.entries.get(&folded[i..i + n])?;
            (!inside_exclusion(i, i + n)).then_some(Candidate {
                start: i,
                len: n,
                ambiguous: entry.ambiguous,
            })
        });
        match found {
            Some(c) => {
                i += c.len;
                cands.push(c);
            }
            None => i += 1,
        }
    }

    let tokens = sentence.tokens();
    let range_of = |c: &Candidate| TokenRange {
        start: content[c.start],
        end: content[c.start + c.len - 1] + 1,
    };
    let caps_context = !is_all_caps(sentence) && !is_title_cased(sentence);
    let fires: Vec<bool> = cands
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if !c.ambiguous || !cfg.require_context_for_ambiguous {
                return true;
            }
            let t = cfg.triggers;
            let r = range_of(c);
            let quoted = r.start > 0
                && r.end < tokens.len()
                && tokens[r.start - 1].is_quote()
                && tokens[r.end].is_quote();
            let touches = |other: Option<&Candidate>| {
                other.is_some_and(|o| {
                    !o.ambiguous && (o.start + o.len == c.start || c.start + c.len == o.start)
                })
            };
            let adjacent =
                touches(k.checked_sub(1).and_then(|p| cands.get(p))) || touches(cands.get(k + 1));
            let capitalized = c.start > 0 && caps_context && starts_upper(&tokens[r.start].surface);
            (t.quotes && quoted) || (t.adjacency && adjacent) || (t.capitalization && capitalized)
        })
        .collect();

    cands
        .iter()
        .zip(fires)
        .filter(|(_, f)| *f)
        .map(|(c, _)| {
            let r = range_of(c);
            SpanAnnotation {
                surface: sentence.token_text(r).to_string(),
                label: crate::corpus::DEFAULT_LABEL.to_string(),
                located: Some(vec![sentence.char_range(r)]),
            }
        })
        .collect()
}

/// Runs [`detect`] on every sentence; output keeps input order.
pub fn detect_corpus(
    records: &[AnnotatedSentence],
    gaz: &Gazetteer,
    cfg: &RuleConfig,
) -> Vec<AnnotatedSentence> {
    records
        .par_iter()
        .map(|r| AnnotatedSentence::new(r.sentence.clone(), detect(&r.sentence, gaz, cfg)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz(lines: &str, excl: &str) -> Gazetteer {
        load_gazetteer(lines.as_bytes(), excl.as_bytes()).unwrap()
    }

    fn run(g: &Gazetteer, text: &str) -> Vec<String> {
        detect(&Sentence::new("t", text), g, &RuleConfig::default())
            .into_iter()
            .map(|s| s.surface)
            .collect()
    }

    #[test]
    fn load_counts_flags() {
        let g = gaz("smartwatch\nprime time\nred\tambiguous\n", "");
        assert_eq!(g.len(), 3);
        assert_eq!(g.ambiguous_count(), 1);
    }

    #[test]
    fn load_merges_duplicates() {
        let g = gaz("Look\nlook\tambiguous\n", "");
        assert_eq!(g.len(), 1);
        assert!(g.get("LOOK").unwrap().ambiguous);
        assert!(gaz("", "").is_empty());
    }

    #[test]
    fn load_rejects_bad_lines() {
        assert!(matches!(
            load_gazetteer("ok\nred\tmaybe\n".as_bytes(), "".as_bytes()),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(
            load_gazetteer("“”\n".as_bytes(), "".as_bytes()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        assert!(load_gazetteer("a\tambiguous\tx\n".as_bytes(), "".as_bytes()).is_err());
    }

    #[test]
    fn longest_match() {
        let g = gaz("smartwatch\nprime time\nprime\n", "");
        assert_eq!(
            run(&g, "El nuevo smartwatch llega en prime time"),
            ["smartwatch", "prime time"]
        );
    }

    #[test]
    fn ambiguous_needs_context() {
        let g = gaz("red\tambiguous\ntotal red\n", "");
        assert!(run(&g, "La red de carreteras").is_empty());
        assert_eq!(run(&g, "un conjunto total red"), ["total red"]);
        assert_eq!(run(&g, "una “red” social"), ["red"]);
        assert_eq!(run(&g, "la nueva Red de moda"), ["Red"]);
        assert!(run(&g, "La Red De Carreteras").is_empty());
        assert!(run(&g, "LA RED DE CARRETERAS").is_empty());
    }

    #[test]
    fn ambiguous_next_to_known_borrowing() {
        let g = gaz("look\ntotal black\tambiguous\n", "");
        assert_eq!(
            run(&g, "La actriz lució un look total black en el estreno"),
            ["look", "total black"]
        );
        assert!(run(&g, "el total black de siempre").is_empty());
    }

    #[test]
    fn triggers_can_be_disabled() {
        let g = gaz("red\tambiguous\n", "");
        let s = Sentence::new("t", "una “red” social");
        let mut cfg = RuleConfig::default();
        cfg.triggers.quotes = false;
        assert!(detect(&s, &g, &cfg).is_empty());
        cfg.require_context_for_ambiguous = false;
        assert_eq!(detect(&s, &g, &cfg).len(), 1);
    }

    #[test]
    fn exclusions_beat_entries() {
        let g = gaz(
            "band\nbig band\n",
            "Sgt. Pepper's Lonely Hearts Club Band\n",
        );
        assert!(run(
            &g,
            "Escuchamos el disco “Sgt. Pepper's Lonely Hearts Club Band” otra vez."
        )
        .is_empty());
        assert_eq!(run(&g, "Tocó una big band de jazz"), ["big band"]);
        let s = Sentence::new("t", "el disco Sgt. Pepper's Lonely Hearts Club Band");
        let cfg = RuleConfig {
            use_exclusions: false,
            ..RuleConfig::default()
        };
        assert_eq!(detect(&s, &g, &cfg)[0].surface, "Band");
    }

    #[test]
    fn output_is_ordered_and_located() {
        let g = gaz("look\nhype\n", "");
        let s = Sentence::new("t", "el hype del look");
        let out = detect(&s, &g, &RuleConfig::default());
        let starts: Vec<usize> = out
            .iter()
            .map(|o| o.located.as_ref().unwrap()[0].start)
            .collect();
        assert_eq!(starts, [3, 12]);
    }

    #[test]
    fn max_phrase_tokens_limits_matches() {
        let g = gaz("prime time\ntime\n", "");
        let s = Sentence::new("t", "en prime time");
        let cfg = RuleConfig {
            max_phrase_tokens: 1,
            ..RuleConfig::default()
        };
        assert_eq!(detect(&s, &g, &cfg)[0].surface, "time");
        assert!(RuleConfig {
            max_phrase_tokens: 0,
            ..cfg
        }
        .validate()
        .is_err());
    }
}
