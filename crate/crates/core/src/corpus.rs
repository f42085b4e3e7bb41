//! Corpus formats: the semicolon-separated span CSV and the tab-separated
//! BIO token format.
//!
//! CSV records are `sentence;span1;span2;...`. Fields may be wrapped in
//! double quotes, in which case semicolons and newlines inside are literal
//! and `""` stands for one `"`. Unquoted fields split on every semicolon, so
//! plain files written without any quoting still read correctly. A field
//! that opens with a quote but continues past the closing quote (for example
//! `"CASUAL LOOKS" con bufanda`) is taken verbatim up to the next semicolon.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::text::{assign_occurrences, locate_span, CharRange, Sentence};

pub const DEFAULT_LABEL: &str = "ENG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanAnnotation {
    /// The span as written in the source file.
    pub surface: String,
    pub label: String,
    pub located: Option<Vec<CharRange>>,
}

impl SpanAnnotation {
    pub fn new(surface: impl Into<String>) -> Self {
        Self::with_label(surface, DEFAULT_LABEL)
    }

    pub fn with_label(surface: impl Into<String>, label: impl Into<String>) -> Self {
        SpanAnnotation {
            surface: surface.into(),
            label: label.into(),
            located: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub sentence: Sentence,
    pub spans: Vec<SpanAnnotation>,
}

impl AnnotatedSentence {
    pub fn new(sentence: Sentence, spans: Vec<SpanAnnotation>) -> Self {
        AnnotatedSentence { sentence, spans }
    }

    /// Convenience constructor for unlabelled (ENG) spans.
    pub fn from_parts<S: AsRef<str>>(id: &str, text: &str, spans: &[S]) -> Self {
        AnnotatedSentence {
            sentence: Sentence::new(id, text),
            spans: spans
                .iter()
                .map(|s| SpanAnnotation::new(s.as_ref()))
                .collect(),
        }
    }

    /// Fills `located` on every span with all of its occurrences.
    pub fn locate(&mut self) {
        for span in &mut self.spans {
            span.located = Some(locate_span(&self.sentence, &span.surface));
        }
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.spans.iter().map(|s| s.surface.as_str())
    }
}

/// Non-fatal problem found while reading input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn strip_bom(line: &mut String) {
    if line.starts_with('\u{feff}') {
        line.drain(..'\u{feff}'.len_utf8());
    }
}

enum Parsed {
    Fields(Vec<String>),
    /// A quoted field is still open at the end of the buffer.
    Open,
}

fn parse_fields(record: &str) -> Parsed {
    let chars: Vec<char> = record.chars().collect();
    let next_semicolon = |from: usize| {
        chars[from..]
            .iter()
            .position(|&c| c == ';')
            .map_or(chars.len(), |p| from + p)
    };
    let mut fields = Vec::new();
    let mut i = 0;
    loop {
        if chars.get(i) == Some(&'"') {
            let mut value = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None => return Parsed::Open,
                    Some('"') if chars.get(j + 1) == Some(&'"') => {
                        value.push('"');
                        j += 2;
                    }
                    Some('"') => {
                        j += 1;
                        break;
                    }
                    Some(&c) => {
                        value.push(c);
                        j += 1;
                    }
                }
            }
            if j == chars.len() || chars[j] == ';' {
                fields.push(value);
                i = j;
            } else {
                let end = next_semicolon(j);
                fields.push(chars[i..end].iter().collect());
                i = end;
            }
        } else {
            let end = next_semicolon(i);
            fields.push(chars[i..end].iter().collect());
            i = end;
        }
        if i >= chars.len() {
            return Parsed::Fields(fields);
        }
        // skip the delimiter
        i += 1;
    }
}

/// Streaming reader over CSV records.
pub struct CsvReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    record_no: usize,
}

impl<R: BufRead> CsvReader<R> {
    pub fn new(reader: R) -> Self {
        CsvReader {
            lines: reader.lines(),
            line_no: 0,
            record_no: 0,
        }
    }

    fn next_line(&mut self) -> Option<std::io::Result<String>> {
        let mut line = self.lines.next()?;
        self.line_no += 1;
        if let Ok(l) = &mut line {
            if self.line_no == 1 {
                strip_bom(l);
            }
            if l.ends_with('\r') {
                l.pop();
            }
        }
        Some(line)
    }
}

impl<R: BufRead> Iterator for CsvReader<R> {
    type Item = Result<AnnotatedSentence>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buffer = loop {
            match self.next_line()? {
                Err(e) => return Some(Err(e.into())),
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => break l,
            }
        };
        let start_line = self.line_no;
        let fields = loop {
            match parse_fields(&buffer) {
                Parsed::Fields(f) => break f,
                Parsed::Open => match self.next_line() {
                    Some(Ok(more)) => {
                        buffer.push('\n');
                        buffer.push_str(&more);
                    }
                    Some(Err(e)) => return Some(Err(e.into())),
                    None => {
                        return Some(Err(Error::malformed(
                            start_line,
                            "unterminated quoted field",
                        )))
                    }
                },
            }
        };
        self.record_no += 1;
        let mut fields = fields.into_iter();
        let text = fields.next().unwrap_or_default();
        let spans = fields
            .filter(|f| !f.trim().is_empty())
            .map(SpanAnnotation::new)
            .collect();
        Some(Ok(AnnotatedSentence::new(
            Sentence::new(self.record_no.to_string(), text),
            spans,
        )))
    }
}

pub fn read_csv<R: BufRead>(reader: R) -> Result<Vec<AnnotatedSentence>> {
    CsvReader::new(reader).collect()
}

pub fn read_csv_str(text: &str) -> Result<Vec<AnnotatedSentence>> {
    read_csv(text.as_bytes())
}

fn needs_quoting(field: &str) -> bool {
    field.trim().is_empty() || field.contains([';', '"', '\n', '\r'])
}

pub(crate) fn write_field<W: Write + ?Sized>(out: &mut W, field: &str) -> std::io::Result<()> {
    if needs_quoting(field) {
        write!(out, "\"{}\"", field.replace('"', "\"\""))
    } else {
        out.write_all(field.as_bytes())
    }
}

pub fn write_record<W: Write + ?Sized>(
    out: &mut W,
    record: &AnnotatedSentence,
) -> std::io::Result<()> {
    write_field(out, record.sentence.text())?;
    for span in &record.spans {
        out.write_all(b";")?;
        write_field(out, &span.surface)?;
    }
    out.write_all(b"\n")
}

pub fn write_csv<W: Write + ?Sized>(
    out: &mut W,
    records: &[AnnotatedSentence],
) -> std::io::Result<()> {
    for r in records {
        write_record(out, r)?;
    }
    Ok(())
}

pub fn write_csv_string(records: &[AnnotatedSentence]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("records hold valid UTF-8")
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

fn parse_tag(tag: &str, line: usize) -> Result<Tag> {
    let unknown = || Error::UnknownTagScheme {
        line,
        tag: tag.to_string(),
    };
    if tag == "O" {
        return Ok(Tag::Outside);
    }
    let (prefix, label) = tag.split_once('-').ok_or_else(unknown)?;
    if label.is_empty() {
        return Err(unknown());
    }
    match prefix {
        "B" => Ok(Tag::Begin(label.to_string())),
        "I" => Ok(Tag::Inside(label.to_string())),
        _ => Err(unknown()),
    }
}

/// One BIO sentence and the repairs made while decoding it.
#[derive(Debug, Clone)]
pub struct BioSentence {
    pub record: AnnotatedSentence,
    pub warnings: Vec<Diagnostic>,
}

/// Streaming reader over blank-line separated `token<TAB>tag` blocks.
pub struct BioReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    sentence_no: usize,
}

impl<R: BufRead> BioReader<R> {
    pub fn new(reader: R) -> Self {
        BioReader {
            lines: reader.lines(),
            line_no: 0,
            sentence_no: 0,
        }
    }

    fn finish(&mut self, rows: Vec<(String, Tag, usize)>) -> BioSentence {
        self.sentence_no += 1;
        let mut warnings = Vec::new();
        let mut text = String::new();
        let mut offsets = Vec::with_capacity(rows.len());
        for (i, (tok, _, _)) in rows.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let start = text.chars().count();
            text.push_str(tok);
            offsets.push((start, start + tok.chars().count()));
        }

        // (label, first row, last row)
        let mut runs: Vec<(String, usize, usize)> = Vec::new();
        let mut open: Option<(String, usize, usize)> = None;
        for (i, (_, tag, line)) in rows.iter().enumerate() {
            match tag {
                Tag::Outside => runs.extend(open.take()),
                Tag::Begin(label) => {
                    runs.extend(open.take());
                    open = Some((label.clone(), i, i));
                }
                Tag::Inside(label) => match &mut open {
                    Some((l, _, end)) if l == label => *end = i,
                    _ => {
                        warnings.push(Diagnostic {
                            line: *line,
                            message: format!(
                                "I-{label} without a preceding B-{label}; read as B-{label}"
                            ),
                        });
                        runs.extend(open.take());
                        open = Some((label.clone(), i, i));
                    }
                },
            }
        }
        runs.extend(open);

        let spans = runs
            .into_iter()
            .map(|(label, first, last)| {
                let surface = rows[first..=last]
                    .iter()
                    .map(|(t, _, _)| t.as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                let range = CharRange {
                    start: offsets[first].0,
                    end: offsets[last].1,
                };
                SpanAnnotation {
                    surface,
                    label,
                    located: Some(vec![range]),
                }
            })
            .collect();
        BioSentence {
            record: AnnotatedSentence::new(
                Sentence::new(self.sentence_no.to_string(), text),
                spans,
            ),
            warnings,
        }
    }
}

impl<R: BufRead> Iterator for BioReader<R> {
    type Item = Result<BioSentence>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut rows: Vec<(String, Tag, usize)> = Vec::new();
        loop {
            let line = match self.lines.next() {
                None => break,
                Some(Err(e)) => return Some(Err(e.into())),
                Some(Ok(mut l)) => {
                    self.line_no += 1;
                    if self.line_no == 1 {
                        strip_bom(&mut l);
                    }
                    if l.ends_with('\r') {
                        l.pop();
                    }
                    l
                }
            };
            if line.trim().is_empty() {
                if rows.is_empty() {
                    continue;
                }
                break;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields[0].trim().is_empty() {
                return Some(Err(Error::malformed(
                    self.line_no,
                    format!("expected `token<TAB>tag`, got {} field(s)", fields.len()),
                )));
            }
            let tag = match parse_tag(fields[1].trim(), self.line_no) {
                Ok(t) => t,
                Err(e) => return Some(Err(e)),
            };
            rows.push((fields[0].trim().to_string(), tag, self.line_no));
        }
        if rows.is_empty() {
            None
        } else {
            Some(Ok(self.finish(rows)))
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BioCorpus {
    pub records: Vec<AnnotatedSentence>,
    pub warnings: Vec<Diagnostic>,
}

/// Reads a BIO file. Sentence text is the tokens joined by single spaces.
/// Stray `I-X` tags are repaired to `B-X` and reported in `warnings`.
pub fn read_bio<R: BufRead>(reader: R) -> Result<BioCorpus> {
    let mut corpus = BioCorpus::default();
    for item in BioReader::new(reader) {
        let BioSentence { record, warnings } = item?;
        corpus.records.push(record);
        corpus.warnings.extend(warnings);
    }
    Ok(corpus)
}

pub fn read_bio_str(text: &str) -> Result<BioCorpus> {
    read_bio(text.as_bytes())
}

/// Tags the tokens of each span's earliest free occurrence.
pub fn spans_to_bio(record: &AnnotatedSentence) -> Result<Vec<(String, String)>> {
    let sentence = &record.sentence;
    let ranges = assign_occurrences(sentence, record.surfaces());
    let mut tags: Vec<Option<(usize, String)>> = vec![None; sentence.tokens().len()];
    for (k, (span, range)) in record.spans.iter().zip(ranges).enumerate() {
        let range = range.ok_or_else(|| Error::UnlocatableSpan {
            span: span.surface.clone(),
            sentence: sentence.text().to_string(),
        })?;
        for i in range.indices() {
            if let Some((other, _)) = &tags[i] {
                return Err(Error::OverlappingSpans {
                    first: record.spans[*other].surface.clone(),
                    second: span.surface.clone(),
                });
            }
            let prefix = if i == range.start { "B" } else { "I" };
            tags[i] = Some((k, format!("{prefix}-{}", span.label)));
        }
    }
    Ok(sentence
        .tokens()
        .iter()
        .zip(tags)
        .map(|(t, tag)| {
            (
                t.surface.clone(),
                tag.map_or_else(|| "O".to_string(), |(_, t)| t),
            )
        })
        .collect())
}

pub fn write_bio_sentence<W: Write + ?Sized>(
    out: &mut W,
    rows: &[(String, String)],
) -> std::io::Result<()> {
    for (token, tag) in rows {
        writeln!(out, "{token}\t{tag}")?;
    }
    writeln!(out)
}

/// Checks that every span of every record occurs in its sentence.
pub fn validate_locatable(records: &[AnnotatedSentence]) -> Result<()> {
    for r in records {
        if let Some(span) = r
            .spans
            .iter()
            .find(|s| locate_span(&r.sentence, &s.surface).is_empty())
        {
            return Err(Error::UnlocatableSpan {
                span: span.surface.clone(),
                sentence: r.sentence.text().to_string(),
            });
        }
    }
    Ok(())
}

/// Spans that do not occur in their sentence, reported against the record
/// number.
pub fn unlocatable_spans(records: &[AnnotatedSentence]) -> Vec<Diagnostic> {
    records
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            r.spans
                .iter()
                .filter(|s| locate_span(&r.sentence, &s.surface).is_empty())
                .map(move |s| Diagnostic {
                    line: i + 1,
                    message: format!("span {:?} does not occur in the sentence", s.surface),
                })
        })
        .collect()
}
