//! Exit-code classes.

use std::fmt::Display;

pub const USAGE: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Invalid arguments
    Usage,
    Io,
    /// Malformed input files
    Parse,
    /// Well-formed input the analysis rejects
    Validation,
    NotConverged,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Usage => USAGE,
            Kind::Io => 3,
            Kind::Parse => 4,
            Kind::Validation => 5,
            Kind::NotConverged => 6,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: Kind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn msg(kind: Kind, msg: impl Display) -> Self {
        Self::new(kind, anyhow::anyhow!("{msg}"))
    }
}

/// Tag an error with its exit class.
pub trait Classify<T> {
    fn or_fail_with<C: Display + Send + Sync + 'static>(
        self,
        kind: Kind,
        context: impl FnOnce() -> C,
    ) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_fail_with<C: Display + Send + Sync + 'static>(
        self,
        kind: Kind,
        context: impl FnOnce() -> C,
    ) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(kind, e.into().context(context())))
    }
}

/// Exit class of a library error: bad numbers from the user are usage
/// errors, malformed data is a parse error, the rest is validation.
pub fn library(e: qcausal::Error) -> Failure {
    use qcausal::Error as E;
    let kind = match &e {
        E::OutOfRange { .. } | E::ZeroShots => Kind::Usage,
        E::Format(_) => Kind::Parse,
        _ => Kind::Validation,
    };
    Failure::new(kind, e)
}
