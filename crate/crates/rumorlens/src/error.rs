use std::fmt;
use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// Incompatible matrix or sequence shapes, naming both sides.
    Shape { op: &'static str, detail: String },
    /// A model or run configuration violates one of its constraints.
    Config(String),
    /// A token index is outside the vocabulary.
    Encoding(String),
    /// Input sequence shorter than a convolution kernel or pool window.
    SequenceTooShort { op: &'static str, needed: usize, got: usize },
    /// Underlying file-system failure.
    Io { path: PathBuf, source: std::io::Error },
    /// Too many malformed lines (or none usable) in an input corpus.
    CorpusRejected { reason: String, bad_lines: Vec<usize> },
    /// A class has fewer examples than the number of folds.
    InsufficientClass { label: u8, count: usize, k: usize },
    /// Metrics requested over zero evaluated examples.
    EmptyEvaluation,
    /// The loss became non-finite during training.
    TrainingDiverged { epoch: usize, batch: usize, fold: Option<usize> },
    /// A persisted file declares a schema version this build does not read.
    UnsupportedVersion { found: u64, supported: u64 },
    /// A persisted model or results file is structurally inconsistent.
    CorruptModel(String),
    /// Command-line usage problem.
    Usage(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, detail } => write!(f, "shape mismatch in {op}: {detail}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Encoding(msg) => write!(f, "encoding error: {msg}"),
            Error::SequenceTooShort { op, needed, got } => {
                write!(f, "sequence too short for {op}: need at least {needed}, got {got}")
            }
            Error::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
            Error::CorpusRejected { reason, bad_lines } => {
                write!(f, "corpus rejected: {reason}")?;
                if !bad_lines.is_empty() {
                    write!(f, " (lines {:?})", bad_lines)?;
                }
                Ok(())
            }
            Error::InsufficientClass { label, count, k } => write!(
                f,
                "class {label} has only {count} examples, fewer than k={k} folds"
            ),
            Error::EmptyEvaluation => write!(f, "cannot compute metrics over zero examples"),
            Error::TrainingDiverged { epoch, batch, fold } => {
                write!(f, "training diverged: non-finite loss at epoch {epoch}, batch {batch}")?;
                if let Some(fold) = fold {
                    write!(f, " (fold {fold})")?;
                }
                Ok(())
            }
            Error::UnsupportedVersion { found, supported } => {
                write!(f, "unsupported schema version {found}, this build reads version {supported}")
            }
            Error::CorruptModel(msg) => write!(f, "corrupt model file: {msg}"),
            Error::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
