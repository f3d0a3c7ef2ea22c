use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants fall into three families that the CLI maps onto exit codes:
/// parameter/format problems, transport failures, and integrity failures
/// (values on the wire that valid traffic can never produce).
#[derive(Debug, Error)]
pub enum Error {
    #[error("value is not below the moduli product")]
    InputOutOfRange,
    #[error("residue {index} is not below its modulus")]
    ResidueOutOfRange { index: usize },
    #[error("gcd(0, 0) is undefined")]
    BothZero,
    #[error("fewer than {needed} primes of bit length {bits} exist")]
    NotEnoughPrimes { bits: u64, needed: usize },
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(String, String),
    #[error("moduli product is below 2^{bits}")]
    ProductTooSmall { bits: u64 },
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("rejection sampling did not terminate within 128 draws")]
    GeneratorExhausted,
    #[error("bad length: {0}")]
    BadLength(String),
    #[error("bad padding")]
    BadPadding,
    #[error("value does not fit in {bits} bits")]
    Overflow { bits: u64 },
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("no packet for selected channel {0}")]
    MissingChannel(u16),
    #[error("key file has bad magic")]
    BadMagic,
    #[error("unsupported key file version {0}")]
    BadVersion(u8),
    #[error("key file is truncated")]
    Truncated,
    #[error("key file violates config invariants: {0}")]
    InvariantViolation(String),
    #[error("cell stream length {len} is not a multiple of width {width}")]
    WidthMismatch { len: usize, width: usize },
    #[error("cell has width {actual}, channel expects {expected}")]
    BadWidth { expected: usize, actual: usize },
    #[error("failed to bind {addr}: {source}")]
    BindFailed {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to connect to {addr}: {source}")]
    ConnectFailed {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("channel {0} closed")]
    Closed(u16),
    #[error("channel {0} ended inside a cell")]
    PartialCell(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Failures of the channels themselves rather than of the data on them.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            Error::BindFailed { .. }
                | Error::ConnectFailed { .. }
                | Error::Timeout(_)
                | Error::Closed(_)
                | Error::PartialCell(_)
                | Error::Io(_)
        )
    }

    /// Data that honest traffic under the right key can never produce:
    /// desynchronization, tampering or a mismatched key.
    pub fn is_integrity(&self) -> bool {
        matches!(
            self,
            Error::ResidueOutOfRange { .. }
                | Error::Overflow { .. }
                | Error::BadPadding
                | Error::MissingChannel(_)
                | Error::InputOutOfRange
        )
    }
}
