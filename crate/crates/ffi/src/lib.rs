//! C interface to borrowkit.
//!
//! Every fallible function returns a [`BkStatus`]; on failure the message is
//! available from [`bk_last_error_message`] on the same thread. Strings
//! returned through `char **` out-parameters are owned by the caller and must
//! be released with [`bk_string_free`]. Handles are released with their
//! matching `*_free` function. Input strings must be NUL-terminated UTF-8.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use borrowkit::corpus::{read_csv_str, SpanAnnotation};
use borrowkit::rules::{detect, Gazetteer, RuleConfig};
use borrowkit::scorer::score_corpus;
use borrowkit::stat::{merge_multiword, predict_tokens, Lexicons, Model};
use borrowkit::text::{normalize_span, Sentence};
use borrowkit::typology::{classify_corpus, write_error_report};
use borrowkit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// The content of an input could not be parsed or is inconsistent.
    FormatError = 3,
    InvalidArgument = 4,
    Internal = 5,
}

/// Corpus score. Ratios are in [0, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BkScore {
    pub tp_count: usize,
    pub fp_count: usize,
    pub fn_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Sentence pairs whose texts differ.
    pub mismatches: usize,
}

/// Character offsets of a span in its sentence, end exclusive.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BkRange {
    pub start: usize,
    pub end: usize,
}

pub struct BkGazetteer(Gazetteer);

pub struct BkModel(Model);

pub struct BkLexicons(Lexicons);

/// Detected spans of one sentence.
pub struct BkSpanList {
    surfaces: Vec<CString>,
    ranges: Vec<BkRange>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(BkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_format_error() {
            BkStatus::FormatError
        } else {
            match e {
                Error::InvalidConfig(_) | Error::DegenerateDataset | Error::EmptyDataset => {
                    BkStatus::InvalidArgument
                }
                _ => BkStatus::Internal,
            }
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BkStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            BkStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(BkStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(BkStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(BkStatus::NullArgument, format!("{name} is NULL")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(BkStatus::NullArgument, format!("{name} is NULL")))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(BkStatus::Internal, "output contains a NUL byte".into()))
}

fn span_list(spans: Vec<SpanAnnotation>) -> Result<*mut BkSpanList, Failure> {
    let mut list = BkSpanList {
        surfaces: Vec::with_capacity(spans.len()),
        ranges: Vec::with_capacity(spans.len()),
    };
    for s in spans {
        let r = s
            .located
            .as_ref()
            .and_then(|l| l.first())
            .map(|r| BkRange {
                start: r.start,
                end: r.end,
            })
            .unwrap_or_default();
        list.surfaces.push(
            CString::new(s.surface)
                .map_err(|_| Failure(BkStatus::Internal, "span contains NUL".into()))?,
        );
        list.ranges.push(r);
    }
    Ok(Box::into_raw(Box::new(list)))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn bk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn bk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Normalizes a span for comparison.
#[no_mangle]
pub unsafe extern "C" fn bk_normalize_span(raw: *const c_char, out: *mut *mut c_char) -> BkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = normalize_span(text(raw, "raw")?)?;
        *out = owned_string(n.into_string())?;
        Ok(())
    })
}

/// Scores two semicolon-separated corpora given as file contents.
#[no_mangle]
pub unsafe extern "C" fn bk_score_csv(
    gold_csv: *const c_char,
    pred_csv: *const c_char,
    out: *mut BkScore,
) -> BkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let gold = read_csv_str(text(gold_csv, "gold_csv")?)?;
        let pred = read_csv_str(text(pred_csv, "pred_csv")?)?;
        let s = score_corpus(&gold, &pred)?;
        *out = BkScore {
            tp_count: s.report.tp,
            fp_count: s.report.fp,
            fn_count: s.report.fn_,
            precision: s.report.precision,
            recall: s.report.recall,
            f1: s.report.f1,
            mismatches: s.mismatches.len(),
        };
        Ok(())
    })
}

/// Classifies prediction errors; `report_out` receives the error report
/// (header line plus one row per error).
#[no_mangle]
pub unsafe extern "C" fn bk_errors_csv(
    gold_csv: *const c_char,
    pred_csv: *const c_char,
    report_out: *mut *mut c_char,
) -> BkStatus {
    guard(|| {
        let out = out_ptr(report_out, "report_out")?;
        let gold = read_csv_str(text(gold_csv, "gold_csv")?)?;
        let pred = read_csv_str(text(pred_csv, "pred_csv")?)?;
        let records = classify_corpus(&gold, &pred)?;
        let mut buf = Vec::new();
        write_error_report(&mut buf, &records).map_err(Error::from)?;
        let report = String::from_utf8(buf)
            .map_err(|_| Failure(BkStatus::Internal, "report is not UTF-8".into()))?;
        *out = owned_string(report)?;
        Ok(())
    })
}

/// Builds a gazetteer from entry lines and optional exclusion lines.
/// `exclusions` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn bk_gazetteer_load(
    entries: *const c_char,
    exclusions: *const c_char,
    out: *mut *mut BkGazetteer,
) -> BkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mut gaz = Gazetteer::new();
        gaz.read_entries(text(entries, "entries")?.as_bytes())?;
        if !exclusions.is_null() {
            gaz.read_exclusions(text(exclusions, "exclusions")?.as_bytes())?;
        }
        *out = Box::into_raw(Box::new(BkGazetteer(gaz)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bk_gazetteer_free(gaz: *mut BkGazetteer) {
    if !gaz.is_null() {
        drop(Box::from_raw(gaz));
    }
}

/// Number of entries, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn bk_gazetteer_len(gaz: *const BkGazetteer) -> usize {
    gaz.as_ref().map_or(0, |g| g.0.len())
}

/// Runs the gazetteer detector with default settings.
#[no_mangle]
pub unsafe extern "C" fn bk_detect(
    gaz: *const BkGazetteer,
    sentence: *const c_char,
    out: *mut *mut BkSpanList,
) -> BkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let gaz = handle(gaz, "gaz")?;
        let s = Sentence::new("", text(sentence, "sentence")?);
        *out = span_list(detect(&s, &gaz.0, &RuleConfig::default()))?;
        Ok(())
    })
}

/// Parses a model file's contents.
#[no_mangle]
pub unsafe extern "C" fn bk_model_load(
    model_text: *const c_char,
    out: *mut *mut BkModel,
) -> BkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = Model::from_text(text(model_text, "model_text")?)?;
        *out = Box::into_raw(Box::new(BkModel(model)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bk_model_free(model: *mut BkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds lexicons from newline-separated word lists.
#[no_mangle]
pub unsafe extern "C" fn bk_lexicons_load(
    spanish: *const c_char,
    english: *const c_char,
    out: *mut *mut BkLexicons,
) -> BkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let lex = Lexicons::load(
            text(spanish, "spanish")?.as_bytes(),
            text(english, "english")?.as_bytes(),
        )?;
        *out = Box::into_raw(Box::new(BkLexicons(lex)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bk_lexicons_free(lex: *mut BkLexicons) {
    if !lex.is_null() {
        drop(Box::from_raw(lex));
    }
}

/// Runs the token classifier and merges positive tokens into spans. A
/// non-zero `bridging` lets single function words join two spans.
#[no_mangle]
pub unsafe extern "C" fn bk_predict(
    model: *const BkModel,
    lex: *const BkLexicons,
    sentence: *const c_char,
    bridging: c_int,
    out: *mut *mut BkSpanList,
) -> BkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = &handle(model, "model")?.0;
        let lex = &handle(lex, "lex")?.0;
        let s = Sentence::new("", text(sentence, "sentence")?);
        let probs = predict_tokens(model, &s, lex);
        *out = span_list(merge_multiword(
            &s,
            &probs,
            model.threshold(),
            bridging != 0,
        ))?;
        Ok(())
    })
}

/// Number of spans, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn bk_span_list_len(list: *const BkSpanList) -> usize {
    list.as_ref().map_or(0, |l| l.surfaces.len())
}

/// Surface text of span `i`, or NULL when out of range. Owned by the list.
#[no_mangle]
pub unsafe extern "C" fn bk_span_list_surface(list: *const BkSpanList, i: usize) -> *const c_char {
    list.as_ref()
        .and_then(|l| l.surfaces.get(i))
        .map_or(ptr::null(), |s| s.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn bk_span_list_range(
    list: *const BkSpanList,
    i: usize,
    out: *mut BkRange,
) -> BkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let list = handle(list, "list")?;
        *out = *list.ranges.get(i).ok_or_else(|| {
            Failure(
                BkStatus::InvalidArgument,
                format!("span index {i} out of range"),
            )
        })?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bk_span_list_free(list: *mut BkSpanList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}
