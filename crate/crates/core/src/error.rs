use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal contains non-finite samples")]
    NonFinite,
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("pass band [{lo}, {hi}] Hz is outside (0, {nyquist}) Hz")]
    BandOutsideNyquist { lo: f64, hi: f64, nyquist: f64 },
    #[error("no QRS complexes found")]
    NoPeaks,
    #[error("insufficient beats in window: found {found}, need {needed}")]
    InsufficientBeats { found: usize, needed: usize },
    #[error("respiration rate undefined: {peaks} breath peak(s)")]
    UndefinedRate { peaks: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("missing targets: {0}")]
    MissingTargets(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("not enough samples: {0}")]
    NotEnoughSamples(usize),
}
