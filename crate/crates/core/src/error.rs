use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Operand shapes do not line up.
    Dimension(String),
    /// Input outside the domain of an operation (empty vector, empty list...).
    Domain(String),
    /// A caller broke a documented precondition.
    Contract(String),
    /// Invalid configuration value.
    Config(String),
    /// A NaN or infinity showed up where finite values are required.
    NonFinite(String),
    /// Not enough data for the requested partition.
    Sizing(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Contract(msg) => write!(f, "contract error: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Sizing(msg) => write!(f, "sizing error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
