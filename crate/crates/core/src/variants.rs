//! Orthotypographic variants of annotated sentences (casing and quotation
//! marks around the gold spans) and per-variant consistency scoring.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{AnnotatedSentence, SpanAnnotation};
use crate::error::{Error, Result};
use crate::scorer::{score_corpus, ScoreReport};
use crate::text::{assign_occurrences, locate_span, tokenize, CharRange, Sentence, TokenRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Casing {
    Original,
    Lower,
    Upper,
    Title,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QuoteStyle {
    None,
    AsciiDouble,
    CurlyDouble,
    Angled,
}

impl Casing {
    pub const ALL: [Casing; 4] = [
        Casing::Original,
        Casing::Lower,
        Casing::Upper,
        Casing::Title,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Casing::Original => "original",
            Casing::Lower => "lower",
            Casing::Upper => "upper",
            Casing::Title => "title",
        }
    }
}

impl QuoteStyle {
    pub const ALL: [QuoteStyle; 4] = [
        QuoteStyle::None,
        QuoteStyle::AsciiDouble,
        QuoteStyle::CurlyDouble,
        QuoteStyle::Angled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuoteStyle::None => "none",
            QuoteStyle::AsciiDouble => "ascii-double",
            QuoteStyle::CurlyDouble => "curly-double",
            QuoteStyle::Angled => "angled",
        }
    }

    fn marks(self) -> Option<(char, char)> {
        match self {
            QuoteStyle::None => None,
            QuoteStyle::AsciiDouble => Some(('"', '"')),
            QuoteStyle::CurlyDouble => Some(('“', '”')),
            QuoteStyle::Angled => Some(('«', '»')),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariantSpec {
    pub casing: Casing,
    pub quotes: QuoteStyle,
}

impl VariantSpec {
    pub const IDENTITY: VariantSpec = VariantSpec {
        casing: Casing::Original,
        quotes: QuoteStyle::None,
    };

    pub fn new(casing: Casing, quotes: QuoteStyle) -> Self {
        VariantSpec { casing, quotes }
    }

    /// All sixteen combinations, casing-major.
    pub fn all() -> Vec<VariantSpec> {
        Casing::ALL
            .iter()
            .flat_map(|&c| QuoteStyle::ALL.iter().map(move |&q| VariantSpec::new(c, q)))
            .collect()
    }

    /// `<casing>-<quotes>`, as used in variant sentence ids.
    pub fn name(&self) -> String {
        format!("{}-{}", self.casing.name(), self.quotes.name())
    }
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for VariantSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (c, q) = s
            .split_once('-')
            .ok_or_else(|| format!("variant spec {s:?} is not <casing>-<quotes>"))?;
        let casing = Casing::ALL
            .into_iter()
            .find(|x| x.name() == c)
            .ok_or_else(|| format!("unknown casing {c:?}"))?;
        let quotes = QuoteStyle::ALL
            .into_iter()
            .find(|x| x.name() == q)
            .ok_or_else(|| format!("unknown quote style {q:?}"))?;
        Ok(VariantSpec { casing, quotes })
    }
}

/// Variant sentence id: `<id>#<casing>-<quotes>`.
pub fn variant_id(base: &str, spec: &VariantSpec) -> String {
    format!("{base}#{spec}")
}

/// Token ranges of the gold spans, earliest free occurrence each.
fn gold_ranges(record: &AnnotatedSentence) -> Result<Vec<TokenRange>> {
    let s = &record.sentence;
    let ranges = assign_occurrences(s, record.surfaces())
        .into_iter()
        .zip(&record.spans)
        .map(|(r, span)| {
            r.ok_or_else(|| Error::UnlocatableSpan {
                span: span.surface.clone(),
                sentence: s.text().to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<(usize, &TokenRange)> = ranges.iter().enumerate().collect();
    sorted.sort_by_key(|(_, r)| (r.start, r.end));
    for w in sorted.windows(2) {
        if w[0].1.end > w[1].1.start {
            return Err(Error::OverlappingSpans {
                first: record.spans[w[0].0].surface.clone(),
                second: record.spans[w[1].0].surface.clone(),
            });
        }
    }
    Ok(ranges)
}

/// Re-quotes the spans. Returns the new text and each span's char range in it.
fn requote(
    sentence: &Sentence,
    ranges: &[TokenRange],
    style: QuoteStyle,
) -> (String, Vec<CharRange>) {
    let tokens = sentence.tokens();
    let chars: Vec<char> = sentence.text().chars().collect();
    let mut drop = vec![false; chars.len()];
    let mut open_at = vec![false; chars.len() + 1];
    let mut close_at = vec![false; chars.len() + 1];

    for r in ranges {
        let before = r.start.checked_sub(1).map(|i| &tokens[i]);
        let after = tokens.get(r.end);
        if let (Some(b), Some(a)) = (before, after) {
            if b.is_quote() && a.is_quote() {
                drop[b.start] = true;
                drop[a.start] = true;
            }
        }
        let span = sentence.char_range(*r);
        open_at[span.start] = true;
        close_at[span.end] = true;
    }

    let (open, close) = style.marks().unzip();
    let mut text = String::with_capacity(sentence.text().len() + 4 * ranges.len());
    let mut pos = vec![0usize; chars.len() + 1];
    let mut end_pos = vec![0usize; chars.len() + 1];
    let mut n = 0usize;
    for i in 0..=chars.len() {
        end_pos[i] = n;
        if close_at[i] {
            if let Some(c) = close {
                text.push(c);
                n += 1;
            }
        }
        pos[i] = n;
        if open_at[i] {
            if let Some(c) = open {
                text.push(c);
                n += 1;
            }
            pos[i] = n;
        }
        if i < chars.len() && !drop[i] {
            text.push(chars[i]);
            n += 1;
        }
    }
    let spans = ranges
        .iter()
        .map(|r| {
            let c = sentence.char_range(*r);
            CharRange {
                start: pos[c.start],
                end: end_pos[c.end],
            }
        })
        .collect();
    (text, spans)
}

/// Applies casing. Returns the new text and the byte offset in it of every
/// input char position (plus one past the end).
fn recase(text: &str, casing: Casing) -> (String, Vec<usize>) {
    let mut starts = vec![false; text.chars().count()];
    if casing == Casing::Title {
        for t in tokenize(text) {
            starts[t.start] = true;
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut offsets = Vec::with_capacity(starts.len() + 1);
    for (i, c) in text.chars().enumerate() {
        offsets.push(out.len());
        match casing {
            Casing::Original => out.push(c),
            Casing::Lower => out.extend(c.to_lowercase()),
            Casing::Upper => out.extend(c.to_uppercase()),
            Casing::Title if starts[i] => out.extend(c.to_uppercase()),
            Casing::Title => out.extend(c.to_lowercase()),
        }
    }
    offsets.push(out.len());
    (out, offsets)
}

fn apply(
    record: &AnnotatedSentence,
    ranges: &[TokenRange],
    spec: &VariantSpec,
) -> Result<AnnotatedSentence> {
    let (quoted, spans) = requote(&record.sentence, ranges, spec.quotes);
    let (text, offsets) = recase(&quoted, spec.casing);
    let sentence = Sentence::new(variant_id(record.sentence.id(), spec), text);
    let mut out = Vec::with_capacity(spans.len());
    for (old, r) in record.spans.iter().zip(spans) {
        let surface = sentence.text()[offsets[r.start]..offsets[r.end]].to_string();
        let located = locate_span(&sentence, &surface);
        if located.is_empty() {
            return Err(Error::UnlocatableSpan {
                span: surface,
                sentence: sentence.text().to_string(),
            });
        }
        out.push(SpanAnnotation {
            surface,
            label: old.label.clone(),
            located: Some(located),
        });
    }
    Ok(AnnotatedSentence::new(sentence, out))
}

/// One variant per spec, in spec order. Spans keep their labels and count;
/// quotation marks directly enclosing a span are replaced by the spec's.
pub fn gen_variants(
    record: &AnnotatedSentence,
    specs: &[VariantSpec],
) -> Result<Vec<AnnotatedSentence>> {
    let ranges = gold_ranges(record)?;
    specs
        .iter()
        .map(|spec| apply(record, &ranges, spec))
        .collect()
}

/// Variants of every record, record-major.
pub fn variant_corpus(
    records: &[AnnotatedSentence],
    specs: &[VariantSpec],
) -> Result<Vec<AnnotatedSentence>> {
    let per_record: Vec<Vec<AnnotatedSentence>> = records
        .par_iter()
        .map(|r| gen_variants(r, specs))
        .collect::<Result<_>>()?;
    Ok(per_record.into_iter().flatten().collect())
}

pub const DEFAULT_DELTA: f64 = 0.05;

/// Gold and detector output for the sentences of one spec.
#[derive(Debug, Clone)]
pub struct VariantSlice {
    pub spec: VariantSpec,
    pub gold: Vec<AnnotatedSentence>,
    pub pred: Vec<AnnotatedSentence>,
}

#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub scores: Vec<(VariantSpec, ScoreReport)>,
    /// The spec the others are compared against.
    pub baseline: Option<VariantSpec>,
    /// Specs whose F1 is further than `delta` from the baseline's.
    pub flagged: Vec<VariantSpec>,
}

impl ConsistencyReport {
    pub fn score(&self, spec: &VariantSpec) -> Option<&ScoreReport> {
        self.scores.iter().find(|(s, _)| s == spec).map(|(_, r)| r)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<22}  {:>9}  {:>7}  {:>7}  flag\n",
            "variant", "Precision", "Recall", "F1"
        );
        for (spec, r) in &self.scores {
            let flag = if self.flagged.contains(spec) { "*" } else { "" };
            out.push_str(&format!(
                "{:<22}  {:>9.2}  {:>7.2}  {:>7.2}  {}\n",
                spec.name(),
                r.precision * 100.0,
                r.recall * 100.0,
                r.f1 * 100.0,
                flag
            ));
        }
        out
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (spec, r) in &self.scores {
            out.push_str(&format!(
                "{spec}.tp={}\n{spec}.fp={}\n{spec}.fn={}\n{spec}.precision={:.4}\n{spec}.recall={:.4}\n{spec}.f1={:.4}\n",
                r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1
            ));
        }
        let flagged: Vec<String> = self.flagged.iter().map(|s| s.name()).collect();
        out.push_str(&format!("flagged={}\n", flagged.join(",")));
        out
    }
}

/// Scores each slice. The baseline is the identity spec when present,
/// otherwise the first slice.
pub fn consistency_report(slices: &[VariantSlice], delta: f64) -> Result<ConsistencyReport> {
    let scores = slices
        .iter()
        .map(|s| Ok((s.spec, score_corpus(&s.gold, &s.pred)?.report)))
        .collect::<Result<Vec<_>>>()?;
    let baseline = scores
        .iter()
        .find(|(s, _)| *s == VariantSpec::IDENTITY)
        .or(scores.first())
        .map(|(s, r)| (*s, r.f1));
    let flagged = match baseline {
        Some((_, f1)) => scores
            .iter()
            .filter(|(_, r)| (r.f1 - f1).abs() > delta)
            .map(|(s, _)| *s)
            .collect(),
        None => Vec::new(),
    };
    Ok(ConsistencyReport {
        scores,
        baseline: baseline.map(|(s, _)| s),
        flagged,
    })
}

/// Generates variants of `records` for every spec, runs `detector` on each
/// variant sentence and reports consistency.
pub fn stress<F>(
    records: &[AnnotatedSentence],
    specs: &[VariantSpec],
    detector: F,
    delta: f64,
) -> Result<ConsistencyReport>
where
    F: Fn(&Sentence) -> Vec<SpanAnnotation> + Sync,
{
    let slices = specs
        .par_iter()
        .map(|spec| {
            let gold = records
                .iter()
                .map(|r| gen_variants(r, std::slice::from_ref(spec)).map(|mut v| v.remove(0)))
                .collect::<Result<Vec<_>>>()?;
            let pred = gold
                .iter()
                .map(|g| AnnotatedSentence::new(g.sentence.clone(), detector(&g.sentence)))
                .collect();
            Ok(VariantSlice {
                spec: *spec,
                gold,
                pred,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    consistency_report(&slices, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::normalize_span;

    fn one(text: &str, spans: &[&str], spec: VariantSpec) -> AnnotatedSentence {
        let r = AnnotatedSentence::from_parts("7", text, spans);
        gen_variants(&r, &[spec]).unwrap().remove(0)
    }

    #[test]
    fn upper_variant() {
        let v = one(
            "Un fatal error ocurre",
            &["fatal error"],
            VariantSpec::new(Casing::Upper, QuoteStyle::None),
        );
        assert_eq!(v.sentence.text(), "UN FATAL ERROR OCURRE");
        assert_eq!(v.spans[0].surface, "FATAL ERROR");
        assert_eq!(v.sentence.id(), "7#upper-none");
    }

    #[test]
    fn quote_insertion() {
        let v = one(
            "Compró un smartwatch ayer.",
            &["smartwatch"],
            VariantSpec::new(Casing::Original, QuoteStyle::AsciiDouble),
        );
        assert_eq!(v.sentence.text(), "Compró un \"smartwatch\" ayer.");
        assert_eq!(v.spans[0].surface, "smartwatch");
        let v = one(
            "un look y un hype",
            &["look", "hype"],
            VariantSpec::new(Casing::Title, QuoteStyle::Angled),
        );
        assert_eq!(v.sentence.text(), "Un «Look» Y Un «Hype»");
        assert_eq!(v.spans[1].surface, "Hype");
    }

    #[test]
    fn existing_quotes_are_replaced_or_removed() {
        let v = one("el “look” de hoy", &["look"], VariantSpec::IDENTITY);
        assert_eq!(v.sentence.text(), "el look de hoy");
        let v = one(
            "el “look” de hoy",
            &["look"],
            VariantSpec::new(Casing::Lower, QuoteStyle::Angled),
        );
        assert_eq!(v.sentence.text(), "el «look» de hoy");
    }

    #[test]
    fn sixteen_specs() {
        let r = AnnotatedSentence::from_parts(
            "1",
            "La straße y el prime time",
            &["prime time", "straße"],
        );
        let vs = gen_variants(&r, &VariantSpec::all()).unwrap();
        assert_eq!(vs.len(), 16);
        for v in &vs {
            assert_eq!(v.spans.len(), 2);
            for (a, b) in v.spans.iter().zip(&r.spans) {
                assert_eq!(
                    normalize_span(&a.surface).unwrap(),
                    normalize_span(&b.surface).unwrap()
                );
            }
        }
        let ids: Vec<&str> = vs.iter().map(|v| v.sentence.id()).collect();
        assert_eq!(ids[0], "1#original-none");
        assert_eq!(ids[15], "1#title-angled");
    }

    #[test]
    fn unlocatable_gold_is_an_error() {
        let r = AnnotatedSentence::from_parts("1", "nada aquí", &["look"]);
        assert!(matches!(
            gen_variants(&r, &VariantSpec::all()),
            Err(Error::UnlocatableSpan { .. })
        ));
    }

    #[test]
    fn spec_names_round_trip() {
        for s in VariantSpec::all() {
            assert_eq!(s.name().parse::<VariantSpec>().unwrap(), s);
        }
        assert!("upper".parse::<VariantSpec>().is_err());
    }

    #[test]
    fn identity_variant_scores_perfectly() {
        let r = AnnotatedSentence::from_parts("1", "Un “fatal error” ocurre", &["fatal error"]);
        let v = gen_variants(&r, &[VariantSpec::IDENTITY]).unwrap();
        let s = score_corpus(std::slice::from_ref(&r), &v).unwrap();
        assert_eq!(s.report.f1, 1.0);
    }

    #[test]
    fn empty_spec_list() {
        let report = consistency_report(&[], DEFAULT_DELTA).unwrap();
        assert!(report.scores.is_empty() && report.flagged.is_empty());
    }

    #[test]
    fn case_sensitive_detector_is_flagged() {
        let records = vec![
            AnnotatedSentence::from_parts("1", "un look nuevo", &["look"]),
            AnnotatedSentence::from_parts("2", "el hype sigue", &["hype"]),
        ];
        let detector = |s: &Sentence| {
            s.tokens()
                .iter()
                .filter(|t| t.surface == "look" || t.surface == "hype")
                .map(|t| SpanAnnotation::new(t.surface.clone()))
                .collect()
        };
        let report = stress(&records, &VariantSpec::all(), detector, DEFAULT_DELTA).unwrap();
        assert_eq!(report.baseline, Some(VariantSpec::IDENTITY));
        assert_eq!(report.flagged.len(), 8);
        assert!(report
            .flagged
            .iter()
            .all(|s| matches!(s.casing, Casing::Upper | Casing::Title)));
    }
}
