//! Strict span scoring.
//!
//! A predicted span is correct only if it equals a gold span after
//! [`normalize_span`]: casing and surrounding quotation marks are ignored,
//! positions are not considered. Predictions are compared as a set, so a
//! value that occurs several times in the gold of a sentence is fully
//! credited when it is predicted once, and a repeated wrong prediction is one
//! false positive.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use rayon::prelude::*;

use crate::corpus::{AnnotatedSentence, Diagnostic};
use crate::error::{Error, Result};
use crate::text::{normalize_span, NormalizedSpan};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MatchCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        MatchCounts { tp, fp, fn_ }
    }
}

impl Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, rhs: MatchCounts) -> MatchCounts {
        MatchCounts {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

impl Sum for MatchCounts {
    fn sum<I: Iterator<Item = MatchCounts>>(iter: I) -> MatchCounts {
        iter.fold(MatchCounts::default(), Add::add)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts and the ratios derived from them. Undefined ratios are 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreReport {
    pub fn from_counts(c: MatchCounts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ScoreReport {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision,
            recall,
            f1,
        }
    }

    pub fn counts(&self) -> MatchCounts {
        MatchCounts::new(self.tp, self.fp, self.fn_)
    }

    /// `key=value` lines; ratios to four decimals.
    pub fn to_kv(&self) -> String {
        format!(
            "tp={}\nfp={}\nfn={}\nprecision={:.4}\nrecall={:.4}\nf1={:.4}\n",
            self.tp, self.fp, self.fn_, self.precision, self.recall, self.f1
        )
    }

    /// Two-line table with ratios as percentages.
    pub fn to_table(&self) -> String {
        format!(
            "{:>9}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}\n{:>9.2}  {:>7.2}  {:>7.2}  {:>7}  {:>7}  {:>7}\n",
            "Precision",
            "Recall",
            "F1",
            "TP",
            "FP",
            "FN",
            self.precision * 100.0,
            self.recall * 100.0,
            self.f1 * 100.0,
            self.tp,
            self.fp,
            self.fn_
        )
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// Scores one sentence given normalized gold (a multiset) and predictions.
pub fn match_normalized(gold: &[NormalizedSpan], pred: &[NormalizedSpan]) -> MatchCounts {
    let predicted: HashSet<&NormalizedSpan> = pred.iter().collect();
    let mut gold_support: HashMap<&NormalizedSpan, usize> = HashMap::new();
    for g in gold {
        *gold_support.entry(g).or_default() += 1;
    }
    let tp = gold.iter().filter(|g| predicted.contains(g)).count();
    let fp = predicted
        .iter()
        .filter(|p| !gold_support.contains_key(*p))
        .count();
    MatchCounts::new(tp, fp, gold.len() - tp)
}

pub fn normalize_all<'a>(spans: impl IntoIterator<Item = &'a str>) -> Result<Vec<NormalizedSpan>> {
    spans.into_iter().map(normalize_span).collect()
}

pub fn match_sentence<G: AsRef<str>, P: AsRef<str>>(gold: &[G], pred: &[P]) -> Result<MatchCounts> {
    let gold = normalize_all(gold.iter().map(AsRef::as_ref))?;
    let pred = normalize_all(pred.iter().map(AsRef::as_ref))?;
    Ok(match_normalized(&gold, &pred))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceMismatch {
    /// Zero-based position in the corpus.
    pub index: usize,
    pub gold: String,
    pub pred: String,
}

impl fmt::Display for SentenceMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sentence {} differs: gold {:?}, prediction {:?}",
            self.index + 1,
            self.gold,
            self.pred
        )
    }
}

#[derive(Debug, Clone)]
pub struct CorpusScore {
    pub report: ScoreReport,
    /// Pairs whose sentence texts differ; scoring still pairs them.
    pub mismatches: Vec<SentenceMismatch>,
    /// Predicted spans dropped because they were empty once normalized.
    pub dropped: Vec<Diagnostic>,
}

fn same_text(a: &str, b: &str) -> bool {
    a.split_whitespace().eq(b.split_whitespace())
}

/// Scores position-aligned corpora.
pub fn score_corpus(gold: &[AnnotatedSentence], pred: &[AnnotatedSentence]) -> Result<CorpusScore> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    type PerSentence = (MatchCounts, Option<SentenceMismatch>, Vec<Diagnostic>);
    let per_sentence: Vec<PerSentence> = gold
        .par_iter()
        .zip(pred.par_iter())
        .enumerate()
        .map(|(index, (g, p))| {
            let gold_norm = normalize_all(g.surfaces())?;
            let mut dropped = Vec::new();
            let pred_norm: Vec<NormalizedSpan> = p
                .surfaces()
                .filter_map(|s| match normalize_span(s) {
                    Ok(n) => Some(n),
                    Err(_) => {
                        dropped.push(Diagnostic {
                            line: index + 1,
                            message: format!("prediction {s:?} is empty once normalized"),
                        });
                        None
                    }
                })
                .collect();
            let mismatch =
                (!same_text(g.sentence.text(), p.sentence.text())).then(|| SentenceMismatch {
                    index,
                    gold: g.sentence.text().to_string(),
                    pred: p.sentence.text().to_string(),
                });
            Ok((match_normalized(&gold_norm, &pred_norm), mismatch, dropped))
        })
        .collect::<Result<_>>()?;

    let mut mismatches = Vec::new();
    let mut dropped = Vec::new();
    let mut total = MatchCounts::default();
    for (counts, mismatch, d) in per_sentence {
        total = total + counts;
        mismatches.extend(mismatch);
        dropped.extend(d);
    }
    Ok(CorpusScore {
        report: ScoreReport::from_counts(total),
        mismatches,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_examples() {
        assert_eq!(
            match_sentence(&["total red"], &["red"]).unwrap(),
            MatchCounts::new(0, 1, 1)
        );
        assert_eq!(
            match_sentence(&["smartwatch"], &["“SMARTWATCH”"]).unwrap(),
            MatchCounts::new(1, 0, 0)
        );
        assert_eq!(
            match_sentence(&["look", "look"], &["look"]).unwrap(),
            MatchCounts::new(2, 0, 0)
        );
    }

    #[test]
    fn repeated_false_positive_counts_once() {
        assert_eq!(
            match_sentence(&["look"], &["hype", "HYPE", "look"]).unwrap(),
            MatchCounts::new(1, 1, 0)
        );
    }

    #[test]
    fn inner_whitespace_is_collapsed() {
        assert_eq!(
            match_sentence(&["prime time"], &["prime   time"]).unwrap(),
            MatchCounts::new(1, 0, 0)
        );
    }

    #[test]
    fn empty_span_is_rejected() {
        assert!(match_sentence(&["look"], &["“”"]).is_err());
    }

    #[test]
    fn table_rows_from_counts() {
        let r = ScoreReport::from_counts(MatchCounts::new(2050, 24, 26));
        assert!((r.precision - 0.9884).abs() <= 1e-4);
        assert!((r.recall - 0.9874).abs() <= 1e-4);
        assert!((r.f1 - 0.9879).abs() <= 1e-4);
        let r = ScoreReport::from_counts(MatchCounts::new(1982, 68, 94));
        assert!((r.precision - 0.9668).abs() <= 1e-4);
        assert!((r.recall - 0.9547).abs() <= 1e-4);
        assert!((r.f1 - 0.9607).abs() <= 1e-4);
    }

    #[test]
    fn zero_division_is_zero() {
        let r = ScoreReport::from_counts(MatchCounts::new(0, 0, 5));
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = ScoreReport::from_counts(MatchCounts::default());
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn corpus_with_no_predictions() {
        let gold = vec![
            AnnotatedSentence::from_parts("1", "un look", &["look"]),
            AnnotatedSentence::from_parts("2", "el hype", &["hype"]),
        ];
        let pred = vec![
            AnnotatedSentence::from_parts::<&str>("1", "un look", &[]),
            AnnotatedSentence::from_parts::<&str>("2", "el hype", &[]),
        ];
        let s = score_corpus(&gold, &pred).unwrap();
        assert_eq!(s.report.counts(), MatchCounts::new(0, 0, 2));
        assert_eq!(s.report.f1, 0.0);
        assert!(s.mismatches.is_empty());
    }

    #[test]
    fn corpus_errors_and_mismatch() {
        let gold = vec![AnnotatedSentence::from_parts("1", "un look", &["look"])];
        assert!(matches!(
            score_corpus(&gold, &[]),
            Err(Error::LengthMismatch { gold: 1, pred: 0 })
        ));
        let pred = vec![AnnotatedSentence::from_parts("1", "un  look ", &["look"])];
        assert!(score_corpus(&gold, &pred).unwrap().mismatches.is_empty());
        let pred = vec![AnnotatedSentence::from_parts("1", "otro look", &["look"])];
        let s = score_corpus(&gold, &pred).unwrap();
        assert_eq!(s.mismatches.len(), 1);
        assert_eq!(s.report.tp, 1);
    }

    #[test]
    fn kv_format() {
        let r = ScoreReport::from_counts(MatchCounts::new(1, 1, 0));
        assert_eq!(
            r.to_kv(),
            "tp=1\nfp=1\nfn=0\nprecision=0.5000\nrecall=1.0000\nf1=0.6667\n"
        );
    }
}
