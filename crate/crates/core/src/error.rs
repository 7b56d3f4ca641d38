use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The conjugate update produced a non-SPD precision or a non-positive
    /// scale. Expected only with heavily perturbed statistics.
    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("sampler failed in chain {chain} at sweep {sweep}: {reason}")]
    Sampler {
        chain: usize,
        sweep: usize,
        reason: String,
    },
    #[error("valuation of coalition {mask:#b} failed: {source}")]
    Coalition {
        mask: u32,
        #[source]
        source: Box<Error>,
    },
    /// No sign change of `r(τ) - target` on the search grid. `trace` holds
    /// every `(τ, r)` evaluated.
    #[error("no root bracketed for target {target}")]
    NoRoot { target: f64, trace: Vec<(f64, f64)> },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
