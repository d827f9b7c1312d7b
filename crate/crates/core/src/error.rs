use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("insufficient window: end date must be at least 7 days after the anchor")]
    InsufficientWindow,

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("rank deficient design: column(s) {} are linearly dependent on earlier columns", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("degenerate residual covariance")]
    DegenerateResidualCovariance,

    #[error("degenerate factor covariance")]
    DegenerateFactorCovariance,

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("empty universe")]
    EmptyUniverse,

    #[error("year {0} is outside the calendar")]
    YearOutOfRange(i32),

    #[error("invalid synthetic spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("mixed factor models within one table block: {0}")]
    MixedModels(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Errors that reflect statistical degeneracy of the data rather than bad
    /// input plumbing.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::InsufficientData { .. }
                | Error::RankDeficient { .. }
                | Error::DegenerateResidualCovariance
                | Error::DegenerateFactorCovariance
                | Error::EmptyUniverse
        )
    }
}
