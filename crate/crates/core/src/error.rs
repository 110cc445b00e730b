use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates an operation's precondition.
    InvalidParameter(String),
    /// A query fell outside the tabulated range (domain truncation reached).
    Range { value: f64, lo: f64, hi: f64 },
    /// A numerical guard tripped (e.g. the time-change integrand blew up).
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::Range { value, lo, hi } => {
                write!(f, "value {value} outside tabulated range [{lo}, {hi}]")
            }
            Error::Numerical(m) => write!(f, "numerical guard: {m}"),
        }
    }
}

impl core::error::Error for Error {}
