use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("density is zero at v = {at}; the virtual value is undefined there")]
    ZeroDensity { at: f64 },

    #[error("burn {burn} exceeds price {price}")]
    BurnExceedsPrice { burn: f64, price: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid bid grid: {0}")]
    InvalidGrid(String),

    #[error("density would be negative: 27/8*a*c = {lhs} < b^2 = {rhs}")]
    NonnegativityViolated { lhs: f64, rhs: f64 },

    #[error("cdf never reaches 1 on the scanned range")]
    NoUnitRoot,

    #[error("smear width {eps} overlaps neighbouring atoms (half the minimum gap is {half_gap})")]
    OverlapError { eps: f64, half_gap: f64 },

    #[error("optimal revenue and optimal welfare are both zero")]
    ZeroOptimal,

    #[error("composition is only defined for single-bidder mechanisms (n_max = {n_max})")]
    CompositionUndefined { n_max: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed spec: {0}")]
    Spec(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Spec(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
