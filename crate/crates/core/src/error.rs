use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("structural mismatch: {0}")]
    Structural(String),
    #[error("invalid weight: {0}")]
    WeightValidity(String),
    #[error("divergent data: {0}")]
    DivergentData(String),
    #[error("inconsistent weights: lower bound exceeds upper bound at knot {0}")]
    InconsistentWeights(usize),
    #[error("infeasible tube: {0}")]
    Infeasible(String),
    #[error("parameter outside domain: {0}")]
    Domain(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("data not in L^2: {0}")]
    NotInL2(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("grid resolution: {0}")]
    Resolution(String),
    #[error("unsupported profile: {0}")]
    UnsupportedProfile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// A stable machine-readable name for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Structural(_) => "structural",
            Error::WeightValidity(_) => "weight_validity",
            Error::DivergentData(_) => "divergent_data",
            Error::InconsistentWeights(_) => "inconsistent_weights",
            Error::Infeasible(_) => "infeasible",
            Error::Domain(_) => "domain",
            Error::UnsupportedRegime(_) => "unsupported_regime",
            Error::NotInL2(_) => "not_in_l2",
            Error::Precondition(_) => "precondition",
            Error::Resolution(_) => "resolution",
            Error::UnsupportedProfile(_) => "unsupported_profile",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
