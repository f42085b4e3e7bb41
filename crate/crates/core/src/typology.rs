//! Classification of detection errors into the extended MUC typology.
//!
//! Alignment of one sentence runs in four steps:
//!
//! 1. Gold spans take their earliest free occurrence as a token range.
//!    Predictions are deduplicated by normalized value.
//! 2. A prediction whose normalized value equals a gold value matches every
//!    gold span with that value (the scorer's duplicate rule). A matching
//!    value with a different label is a [`ErrorType::TypeError`].
//! 3. The remaining predictions are located (earliest free occurrence) and
//!    the remaining spans of both sides are walked left to right. At each
//!    step the leftmost gold and leftmost prediction either do not overlap
//!    (the earlier one is Missing or Spurious) or they anchor the largest of
//!    these patterns: Missegmented (two or more adjacent gold spans and two
//!    or more adjacent predictions over the same extent), Split (one gold
//!    span containing two or more predictions), Fused (one prediction over
//!    two or more adjacent gold spans). Failing all three, the pair is a
//!    partial overlap and yields OverlapMissing, OverlapSpurious or both.
//! 4. Predictions that do not occur in the sentence are Spurious.
//!
//! Adjacency means consecutive tokens, with quote tokens in between ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{write_field, AnnotatedSentence, SpanAnnotation};
use crate::error::{Error, Result};
use crate::text::{assign_occurrences, normalize_span, NormalizedSpan, Sentence, TokenRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorType {
    Missing,
    Spurious,
    TypeError,
    OverlapMissing,
    OverlapSpurious,
    Split,
    Fused,
    Missegmented,
}

impl ErrorType {
    pub const ALL: [ErrorType; 8] = [
        ErrorType::Missing,
        ErrorType::Spurious,
        ErrorType::TypeError,
        ErrorType::OverlapMissing,
        ErrorType::OverlapSpurious,
        ErrorType::Split,
        ErrorType::Fused,
        ErrorType::Missegmented,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::Missing => "Missing",
            ErrorType::Spurious => "Spurious",
            ErrorType::TypeError => "TypeError",
            ErrorType::OverlapMissing => "OverlapMissing",
            ErrorType::OverlapSpurious => "OverlapSpurious",
            ErrorType::Split => "Split",
            ErrorType::Fused => "Fused",
            ErrorType::Missegmented => "Missegmented",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown error type {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorRecord {
    pub sentence_id: String,
    /// Gold spans involved, with `located` holding the aligned occurrence.
    pub gold: Vec<SpanAnnotation>,
    pub pred: Vec<SpanAnnotation>,
    pub error: ErrorType,
}

#[derive(Debug, Clone)]
struct Node {
    surface: String,
    label: String,
    range: Option<TokenRange>,
}

impl Node {
    fn annotation(&self, sentence: &Sentence) -> SpanAnnotation {
        SpanAnnotation {
            surface: self.surface.clone(),
            label: self.label.clone(),
            located: self.range.map(|r| vec![sentence.char_range(r)]),
        }
    }

    fn tokens(&self) -> TokenRange {
        self.range.expect("only located nodes reach the walk")
    }
}

fn adjacent(sentence: &Sentence, left: TokenRange, right: TokenRange) -> bool {
    left.end <= right.start
        && sentence.tokens()[left.end..right.start]
            .iter()
            .all(|t| t.is_quote())
}

fn is_chain(sentence: &Sentence, nodes: &[&Node]) -> bool {
    nodes
        .windows(2)
        .all(|w| adjacent(sentence, w[0].tokens(), w[1].tokens()))
}

struct Finding {
    error: ErrorType,
    gold: Vec<usize>,
    pred: Vec<usize>,
}

impl Finding {
    fn new(error: ErrorType, gold: Vec<usize>, pred: Vec<usize>) -> Self {
        Finding { error, gold, pred }
    }
}

/// Left-to-right walk over sorted, located, unmatched spans.
fn walk(sentence: &Sentence, gold: &[&Node], pred: &[&Node]) -> Vec<Finding> {
    let mut out = Vec::new();
    let (mut gi, mut pi) = (0, 0);
    while gi < gold.len() || pi < pred.len() {
        if gi == gold.len() {
            out.push(Finding::new(ErrorType::Spurious, vec![], vec![pi]));
            pi += 1;
            continue;
        }
        if pi == pred.len() {
            out.push(Finding::new(ErrorType::Missing, vec![gi], vec![]));
            gi += 1;
            continue;
        }
        let g = gold[gi].tokens();
        let p = pred[pi].tokens();
        if !g.overlaps(&p) {
            if g.start <= p.start {
                out.push(Finding::new(ErrorType::Missing, vec![gi], vec![]));
                gi += 1;
            } else {
                out.push(Finding::new(ErrorType::Spurious, vec![], vec![pi]));
                pi += 1;
            }
            continue;
        }

        // (size, error, gold count, pred count); earlier kinds win ties.
        let mut best: Option<(usize, ErrorType, usize, usize)> = None;
        let mut offer = |size: usize, error: ErrorType, a: usize, b: usize| {
            if best.is_none_or(|(s, ..)| size > s) {
                best = Some((size, error, a, b));
            }
        };

        for a in 2..=gold.len() - gi {
            let gs = &gold[gi..gi + a];
            if !is_chain(sentence, gs) {
                break;
            }
            for b in 2..=pred.len() - pi {
                let ps = &pred[pi..pi + b];
                if !is_chain(sentence, ps) {
                    break;
                }
                let same_extent = gs[0].tokens().start == ps[0].tokens().start
                    && gs[a - 1].tokens().end == ps[b - 1].tokens().end;
                let shifted = gs
                    .iter()
                    .zip(ps.iter())
                    .any(|(x, y)| x.tokens() != y.tokens())
                    || a != b;
                if same_extent && shifted {
                    offer(a + b, ErrorType::Missegmented, a, b);
                }
            }
        }

        let contained = pred[pi..]
            .iter()
            .take_while(|n| g.contains(&n.tokens()))
            .count();
        if contained >= 2 {
            offer(1 + contained, ErrorType::Split, 1, contained);
        }

        let mut fused = 1;
        while gi + fused < gold.len()
            && adjacent(
                sentence,
                gold[gi + fused - 1].tokens(),
                gold[gi + fused].tokens(),
            )
            && gold[gi + fused].tokens().overlaps(&p)
        {
            fused += 1;
        }
        if fused >= 2 {
            offer(fused + 1, ErrorType::Fused, fused, 1);
        }

        if let Some((_, error, a, b)) = best {
            out.push(Finding::new(
                error,
                (gi..gi + a).collect(),
                (pi..pi + b).collect(),
            ));
            gi += a;
            pi += b;
            continue;
        }

        let missing = g.start < p.start || p.end < g.end;
        let spurious = p.start < g.start || g.end < p.end;
        if missing {
            out.push(Finding::new(ErrorType::OverlapMissing, vec![gi], vec![pi]));
        }
        if spurious {
            out.push(Finding::new(ErrorType::OverlapSpurious, vec![gi], vec![pi]));
        }
        if !missing && !spurious && gold[gi].label != pred[pi].label {
            out.push(Finding::new(ErrorType::TypeError, vec![gi], vec![pi]));
        }
        gi += 1;
        pi += 1;
    }
    out
}

/// Aligns one sentence's gold spans with predicted spans and returns every
/// discrepancy, ordered by position in the sentence.
pub fn align_and_classify(gold: &AnnotatedSentence, pred: &[SpanAnnotation]) -> Vec<ErrorRecord> {
    let sentence = &gold.sentence;
    let gold_ranges = assign_occurrences(sentence, gold.surfaces());
    let gold_nodes: Vec<(Option<NormalizedSpan>, Node)> = gold
        .spans
        .iter()
        .zip(gold_ranges)
        .map(|(s, range)| {
            (
                normalize_span(&s.surface).ok(),
                Node {
                    surface: s.surface.clone(),
                    label: s.label.clone(),
                    range,
                },
            )
        })
        .collect();

    // Deduplicate predictions by value; the smallest (surface, label) stands
    // for its value so the outcome does not depend on input order.
    let mut by_value: BTreeMap<NormalizedSpan, (String, String)> = BTreeMap::new();
    for s in pred {
        let Ok(value) = normalize_span(&s.surface) else {
            continue;
        };
        let cand = (s.surface.clone(), s.label.clone());
        by_value
            .entry(value)
            .and_modify(|cur| {
                if cand < *cur {
                    *cur = cand.clone();
                }
            })
            .or_insert(cand);
    }

    let mut records: Vec<(usize, ErrorRecord)> = Vec::new();
    let mut gold_done = vec![false; gold_nodes.len()];
    let mut open_preds: Vec<(String, String)> = Vec::new();
    for (value, (surface, label)) in by_value {
        let hits: Vec<usize> = gold_nodes
            .iter()
            .enumerate()
            .filter(|(_, (v, _))| v.as_ref() == Some(&value))
            .map(|(i, _)| i)
            .collect();
        if hits.is_empty() {
            open_preds.push((surface, label));
            continue;
        }
        for i in hits {
            gold_done[i] = true;
            let node = &gold_nodes[i].1;
            if node.label != label {
                let p = Node {
                    surface: surface.clone(),
                    label: label.clone(),
                    range: node.range,
                };
                records.push((
                    node.range.map_or(usize::MAX, |r| r.start),
                    ErrorRecord {
                        sentence_id: sentence.id().to_string(),
                        gold: vec![node.annotation(sentence)],
                        pred: vec![p.annotation(sentence)],
                        error: ErrorType::TypeError,
                    },
                ));
            }
        }
    }

    let pred_ranges = assign_occurrences(sentence, open_preds.iter().map(|(s, _)| s.as_str()));
    let pred_nodes: Vec<Node> = open_preds
        .into_iter()
        .zip(pred_ranges)
        .map(|((surface, label), range)| Node {
            surface,
            label,
            range,
        })
        .collect();

    let mut located_gold: Vec<&Node> = Vec::new();
    for (i, (_, node)) in gold_nodes.iter().enumerate() {
        if gold_done[i] {
            continue;
        }
        match node.range {
            Some(_) => located_gold.push(node),
            None => records.push((
                usize::MAX,
                ErrorRecord {
                    sentence_id: sentence.id().to_string(),
                    gold: vec![node.annotation(sentence)],
                    pred: vec![],
                    error: ErrorType::Missing,
                },
            )),
        }
    }
    let mut located_pred: Vec<&Node> = Vec::new();
    for node in &pred_nodes {
        match node.range {
            Some(_) => located_pred.push(node),
            None => records.push((
                usize::MAX,
                ErrorRecord {
                    sentence_id: sentence.id().to_string(),
                    gold: vec![],
                    pred: vec![node.annotation(sentence)],
                    error: ErrorType::Spurious,
                },
            )),
        }
    }
    located_gold.sort_by_key(|n| n.tokens());
    located_pred.sort_by_key(|n| n.tokens());

    for f in walk(sentence, &located_gold, &located_pred) {
        let gold: Vec<&Node> = f.gold.iter().map(|&i| located_gold[i]).collect();
        let pred: Vec<&Node> = f.pred.iter().map(|&i| located_pred[i]).collect();
        let key = gold
            .iter()
            .chain(pred.iter())
            .map(|n| n.tokens().start)
            .min()
            .unwrap_or(usize::MAX);
        records.push((
            key,
            ErrorRecord {
                sentence_id: sentence.id().to_string(),
                gold: gold.iter().map(|n| n.annotation(sentence)).collect(),
                pred: pred.iter().map(|n| n.annotation(sentence)).collect(),
                error: f.error,
            },
        ));
    }

    records.sort_by(|(ka, a), (kb, b)| {
        ka.cmp(kb)
            .then(a.error.cmp(&b.error))
            .then_with(|| surfaces(&a.pred).cmp(&surfaces(&b.pred)))
            .then_with(|| surfaces(&a.gold).cmp(&surfaces(&b.gold)))
    });
    records.into_iter().map(|(_, r)| r).collect()
}

fn surfaces(spans: &[SpanAnnotation]) -> Vec<&str> {
    spans.iter().map(|s| s.surface.as_str()).collect()
}

/// Classifies position-aligned corpora; records follow corpus order.
pub fn classify_corpus(
    gold: &[AnnotatedSentence],
    pred: &[AnnotatedSentence],
) -> Result<Vec<ErrorRecord>> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let per_sentence: Vec<Vec<ErrorRecord>> = gold
        .par_iter()
        .zip(pred.par_iter())
        .map(|(g, p)| align_and_classify(g, &p.spans))
        .collect();
    Ok(per_sentence.into_iter().flatten().collect())
}

pub fn error_histogram(records: &[ErrorRecord]) -> BTreeMap<ErrorType, usize> {
    let mut hist: BTreeMap<ErrorType, usize> = ErrorType::ALL.iter().map(|&t| (t, 0)).collect();
    for r in records {
        *hist.entry(r.error).or_default() += 1;
    }
    hist
}

/// The error type with the highest count; ties go to the earlier type.
pub fn modal_error(hist: &BTreeMap<ErrorType, usize>) -> Option<ErrorType> {
    hist.iter()
        .filter(|(_, &n)| n > 0)
        .max_by(|(ta, na), (tb, nb)| na.cmp(nb).then(tb.cmp(ta)))
        .map(|(&t, _)| t)
}

pub const REPORT_HEADER: &str = "sentence_id;gold_spans;predicted_spans;error_type";

/// Writes `sentence_id;gold_spans;predicted_spans;error_type` rows with
/// spans joined by `|`.
pub fn write_error_report<W: Write + ?Sized>(
    out: &mut W,
    records: &[ErrorRecord],
) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in records {
        write_field(out, &r.sentence_id)?;
        out.write_all(b";")?;
        write_field(out, &surfaces(&r.gold).join("|"))?;
        out.write_all(b";")?;
        write_field(out, &surfaces(&r.pred).join("|"))?;
        writeln!(out, ";{}", r.error)?;
    }
    Ok(())
}

pub fn format_histogram(hist: &BTreeMap<ErrorType, usize>) -> String {
    let mut s = String::new();
    for (t, n) in hist {
        s.push_str(&format!("{:<16}{n:>6}\n", t.name()));
    }
    let total: usize = hist.values().sum();
    s.push_str(&format!("{:<16}{total:>6}\n", "Total"));
    s
}
