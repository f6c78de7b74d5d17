use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors are reserved for contract violations visible to callers; numeric
/// routines that can certify their own accuracy return values plus bounds
/// instead of failing.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("sieve limit {0} out of range (need 2 <= limit <= u32::MAX)")]
    SieveLimit(u64),
    #[error("{what} = {value} exceeds table limit {limit}")]
    AboveLimit { what: &'static str, value: u64, limit: u64 },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime {prime} exceeds set bound {bound}")]
    AboveSetBound { prime: u64, bound: u64 },
    #[error("invalid set specification at `{token}`: {reason}")]
    SetSpec { token: String, reason: &'static str },
    #[error("invalid exponent-bound specification at `{token}`: {reason}")]
    FSpec { token: String, reason: &'static str },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("density constant undefined: the zero set of the exponent bound is not thin")]
    NotThick,
    #[error("cannot certify tail below {requested:e}: would need primes beyond {bound}")]
    TailNotCertifiable { requested: f64, bound: u64 },
    #[error("need at least {needed} positive checkpoints in the fit window, found {found}")]
    InsufficientData { needed: usize, found: usize },
}
