use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by every module of the crate.
#[derive(Debug)]
pub enum Error {
    /// An argument is outside the domain of the operation (bad mode index,
    /// empty window, out-of-range parameter, ...).
    Domain(String),
    /// Two objects that must agree in size do not.
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A sensor set is unusable for the requested construction: the monomial
    /// matrix is rank deficient, or the eigenfunction evaluation block is
    /// singular / too ill-conditioned to invert.
    Inadmissible(String),
    /// The Crank–Nicolson denominator vanished for some mode.
    StepSize(String),
    /// A simulated coefficient became non-finite or exceeded the blow-up
    /// threshold. Finite-time blow-up of the free dynamics is an expected
    /// outcome for this equation class, so the report carries diagnostics.
    BlowUp { time: f64, sup_norm: f64 },
    /// Decay-rate fitting could not proceed (too few samples, nonpositive
    /// norms in the window, ...).
    Fit(String),
    /// A configuration document or override could not be parsed.
    Config(String),
    /// A verification scenario ran to completion and found a mismatch.
    Verification(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Dimension {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {got}"),
            Error::Inadmissible(msg) => write!(f, "inadmissible sensor set: {msg}"),
            Error::StepSize(msg) => write!(f, "step-size error: {msg}"),
            Error::BlowUp { time, sup_norm } => write!(
                f,
                "numerical blow-up detected at t = {time:.6}: sup |coefficient| = {sup_norm:.3e}"
            ),
            Error::Fit(msg) => write!(f, "decay fit error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Verification(msg) => write!(f, "verification failure: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
