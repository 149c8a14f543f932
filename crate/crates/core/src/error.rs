use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown distribution `{name}`; valid names: {}", valid.join(", "))]
    UnknownDistribution {
        name: String,
        valid: Vec<&'static str>,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("truncation tolerance {requested:e} unattainable below the cutoff cap; best achievable bound is {achievable:e}")]
    UnattainableTolerance { requested: f64, achievable: f64 },

    #[error(
        "transform length {needed} exceeds the budget of {budget} points; use h >= {minimal_h:e}"
    )]
    MemoryBudget {
        needed: usize,
        budget: usize,
        minimal_h: f64,
    },

    #[error("rate fit needs at least 3 points with positive error, got {0}")]
    InsufficientPoints(usize),

    #[error("sweep aborted at n = {n}: {flagged} of {total} grid points are dominated by the oracle certificate; {advisory}")]
    CertificateDominated {
        n: u64,
        flagged: usize,
        total: usize,
        advisory: String,
    },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
