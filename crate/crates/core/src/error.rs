use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The dense engine was asked for a chain longer than it is configured to hold.
    #[error("chain of {len} qubits exceeds the exact-engine limit of {limit}; use the perturbative engine")]
    Capacity { len: usize, limit: usize },

    #[error("sparse support grew to {support} states, above the cap of {cap}")]
    SupportOverflow { support: usize, cap: usize },

    /// Two perturbatively coupled levels are closer than the degeneracy floor.
    #[error("near-degenerate levels: gap {gap:e} below floor {floor:e} (resonant spin {resonant}, neighbour spin {neighbour})")]
    Degeneracy {
        gap: f64,
        floor: f64,
        resonant: usize,
        neighbour: usize,
    },

    #[error("no threshold crossing in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
}

impl Error {
    /// Short machine-readable tag, used in CLI error reports and CSV status columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Capacity { .. } => "capacity",
            Error::SupportOverflow { .. } => "support_overflow",
            Error::Degeneracy { .. } => "degeneracy",
            Error::NoRoot { .. } => "no_root",
            Error::Eigensolver(_) => "eigensolver",
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
