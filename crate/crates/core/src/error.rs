use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad caller input: out-of-range parameters, mismatched shapes.
    Argument,
    /// Inconsistent or incomplete data.
    Data,
    /// A statistic or geometric construction is undefined on the input.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("duplicate record for stem `{stem_id}`, response `{response}`")]
    DuplicateRecord { stem_id: String, response: String },

    #[error(
        "cloze probability for stem `{stem_id}`, response `{response}` is {stated} but counts give {computed}"
    )]
    Consistency {
        stem_id: String,
        response: String,
        stated: f64,
        computed: f64,
    },

    #[error("stem `{0}` has no responses")]
    EmptyStem(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("token `{0}` is not in the vocabulary")]
    VocabularyIncomplete(String),

    #[error("missing coverage for {} item(s): {}", .0.len(), .0.join(", "))]
    Coverage(Vec<String>),

    #[error("unknown key `{0}`")]
    Lookup(String),

    #[error("n-gram model has no tokens")]
    EmptyModel,

    #[error("distribution has zero total mass")]
    DegenerateDistribution,

    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("regression design is degenerate: x has zero variance")]
    DegenerateDesign,

    #[error("row for `{0}` is constant and cannot be normalized")]
    DegenerateRow(String),

    #[error("vector for `{0}` has zero norm")]
    DegenerateVector(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("spaces share only {0} word(s); at least 3 are needed")]
    InsufficientOverlap(usize),

    #[error("similarity matrices are over different word sets")]
    Alignment,

    #[error("statistic undefined on too many bootstrap resamples ({attempts} draws for {wanted} resamples)")]
    Bootstrap { attempts: usize, wanted: usize },

    #[error("incompatible inputs: {0}")]
    Compatibility(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) | Error::Domain(_) | Error::Lookup(_) | Error::Alignment => {
                ErrorKind::Argument
            }
            Error::DuplicateRecord { .. }
            | Error::Consistency { .. }
            | Error::EmptyStem(_)
            | Error::InvalidRecord(_)
            | Error::VocabularyIncomplete(_)
            | Error::Coverage(_)
            | Error::Compatibility(_) => ErrorKind::Data,
            Error::EmptyModel
            | Error::DegenerateDistribution
            | Error::UndefinedCorrelation(_)
            | Error::DegenerateDesign
            | Error::DegenerateRow(_)
            | Error::DegenerateVector(_)
            | Error::Degenerate(_)
            | Error::InsufficientOverlap(_)
            | Error::Bootstrap { .. } => ErrorKind::Degenerate,
        }
    }
}
