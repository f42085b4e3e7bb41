//! Anglicism detection in Spanish text and strict-span evaluation.
//!
//! The crate is split by concern:
//!
//! - [`text`]: tokenizer, span normalization and span location.
//! - [`corpus`]: semicolon-separated span files and BIO token files.
//! - [`scorer`]: strict span precision/recall/F1.
//! - [`typology`]: error classification of gold/prediction alignments.
//! - [`rules`]: gazetteer detector with contextual triggers.
//! - [`stat`]: binary-feature logistic regression detector.
//! - [`variants`]: casing/quotation variants and consistency reports.

pub mod corpus;
pub mod error;
pub mod rules;
pub mod scorer;
pub mod stat;
pub mod text;
pub mod typology;
pub mod variants;

pub use corpus::{AnnotatedSentence, SpanAnnotation};
pub use error::{Error, Result};
pub use scorer::{score_corpus, ScoreReport};
pub use text::{normalize_span, tokenize, NormalizedSpan, Sentence, Token};
pub use typology::{align_and_classify, ErrorRecord, ErrorType};
