use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected:?}, found {found:?}")]
    Dimension {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("factorization of {what} failed at step {step}: matrix is not positive semidefinite")]
    Factorization { step: usize, what: &'static str },

    #[error("numerical failure at step {step}: {what} is singular")]
    Numerical { step: usize, what: &'static str },

    #[error(
        "H-infinity filter infeasible at step {step}: information matrix has smallest \
         eigenvalue {min_eigenvalue:e} (alpha = {alpha})"
    )]
    Infeasible {
        step: usize,
        alpha: f64,
        min_eigenvalue: f64,
    },

    #[error("fault vector not identifiable for onset candidate {onset} (condition number {condition:e})")]
    NotIdentifiable { onset: usize, condition: f64 },

    #[error("insufficient history: need {needed} records, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("no admissible onset candidate at step {step}")]
    NoCandidate { step: usize },

    #[error("simulation diverged: non-finite state at step {step}")]
    Divergence { step: usize },
}

impl Error {
    pub(crate) fn dimension(
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    ) -> Self {
        Error::Dimension {
            context,
            expected,
            found,
        }
    }
}
