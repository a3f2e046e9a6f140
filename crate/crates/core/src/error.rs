use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid subcarrier layout: {0}")]
    InvalidLayout(String),
    #[error("invalid tap set: {0}")]
    InvalidTapSet(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid distortion: {0}")]
    InvalidDistortion(String),
    #[error("invalid motion model: {0}")]
    InvalidMotion(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("gram matrix ill-conditioned (condition number {cond:.3e} exceeds {bound:.1e})")]
    IllConditioned { cond: f64, bound: f64 },
    #[error("frame layout does not match the estimator layout")]
    LayoutMismatch,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("every tap magnitude is below the noise floor {floor:.3e}")]
    EmptySignal { floor: f64 },
    #[error("dominant tap magnitude {magnitude:.3e} is below the noise floor {floor:.3e}")]
    DominantTapTooWeak { magnitude: f64, floor: f64 },
    #[error("tap set does not contain tap 0")]
    MissingZeroTap,
    #[error("reference subcarrier {0} is not active")]
    RefNotActive(usize),
    #[error("series too short: {seconds:.2} s, need at least {required:.0} s")]
    TooShort { seconds: f64, required: f64 },
    #[error("no spectral peak: peak-to-median ratio {ratio:.2} < 3 (best guess {bpm:.2} bpm)")]
    NoPeak { ratio: f64, bpm: f64 },
    #[error("trace format error: {0}")]
    Format(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Scheme(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
