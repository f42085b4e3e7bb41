use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A span was empty once quotes and whitespace were stripped.
    #[error("span {raw:?} is empty after normalization")]
    EmptySpan { raw: String },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: unknown tag {tag:?} (expected O, B-<LABEL> or I-<LABEL>)")]
    UnknownTagScheme { line: usize, tag: String },

    #[error("span {span:?} does not occur in sentence {sentence:?}")]
    UnlocatableSpan { span: String, sentence: String },

    #[error("spans {first:?} and {second:?} overlap and cannot be encoded as BIO tags")]
    OverlappingSpans { first: String, second: String },

    #[error("gold has {gold} sentences but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },

    #[error("training data contains a single class")]
    DegenerateDataset,

    #[error("training data is empty")]
    EmptyDataset,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn malformed(line: usize, message: impl Into<String>) -> Self {
        Error::MalformedLine {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the content of an input file.
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            Error::EmptySpan { .. }
                | Error::MalformedLine { .. }
                | Error::UnknownTagScheme { .. }
                | Error::UnlocatableSpan { .. }
                | Error::OverlappingSpans { .. }
                | Error::LengthMismatch { .. }
                | Error::InvalidModel(_)
        )
    }
}
