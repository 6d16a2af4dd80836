use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("density is not square integrable ({0}); use the heavy-tail pathway")]
    NotSquareIntegrable(String),

    #[error("heavy-tail condition violated at t = {worst_t:e}: {detail}")]
    ConditionViolated { worst_t: f64, detail: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient tail resolution: {replicates} replicates at level {alpha} leave fewer than 10 tail points")]
    InsufficientTail { replicates: usize, alpha: f64 },

    #[error("tail estimation failed: plain hits {plain_hits}/{plain_replicates}, tilted hits {tilted_hits}/{tilted_replicates}")]
    Estimation {
        plain_hits: u64,
        plain_replicates: usize,
        tilted_hits: u64,
        tilted_replicates: usize,
    },

    #[error("sample-size search exhausted at n = {ceiling}; best seen n = {best_n} with power {best_power:.4}")]
    SearchExhausted {
        ceiling: usize,
        best_n: usize,
        best_power: f64,
    },

    #[error("efficiency is infinite for r = {r} (alternative not square integrable)")]
    InfiniteEfficiency { r: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
