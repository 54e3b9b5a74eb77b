use core::fmt;

/// Everything that can go wrong inside the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    InvalidParameter { name: &'static str, reason: &'static str },
    /// Lengths or dimensions that must agree do not.
    ShapeMismatch { expected: usize, found: usize },
    /// `matrix_element` asked for a level below the ground state.
    BelowGroundState,
    /// The QL iteration of the eigensolver did not converge.
    EigenNoConvergence { index: usize },
    /// Eigensolver failure during propagation, tagged with the time step.
    Propagation { step: usize, source: alloc::boxed::Box<Error> },
    /// Fidelity asked for an impossible (m, N) pair.
    InvalidLevel { m: usize, n: usize },
    /// A waiting-time scan reached `t_max`; `best` is the smallest deviation seen.
    WaitingTimeNotFound { t_max: f64, best: f64 },
    /// Kraus operators do not sum to the identity.
    ChannelIncomplete { defect: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid parameter `{name}`: {reason}"),
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected}, found {found}")
            }
            Error::BelowGroundState => f.write_str("no phonon level below n = 0"),
            Error::EigenNoConvergence { index } => {
                write!(f, "eigensolver did not converge (eigenvalue {index})")
            }
            Error::Propagation { step, source } => write!(f, "propagation failed at step {step}: {source}"),
            Error::InvalidLevel { m, n } => write!(f, "invalid target level m = {m} for N = {n}"),
            Error::WaitingTimeNotFound { t_max, best } => {
                write!(f, "no waiting time below t_max = {t_max} μs (best deviation {best:.3e})")
            }
            Error::ChannelIncomplete { defect } => {
                write!(f, "Kraus operators are not complete (defect {defect:.3e})")
            }
        }
    }
}

impl core::error::Error for Error {}
