use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("mode index {index} out of range for {modes} modes")]
    ModeIndex { index: usize, modes: usize },

    /// State norm deviates from one by more than the renormalization window.
    #[error("state norm squared {norm_sq} is not 1 (tolerance 1e-9)")]
    Normalization { norm_sq: f64 },

    #[error("empty state: no amplitude survives pruning")]
    EmptyState,

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The state has weight outside the subspace a POVM acts on.
    #[error("state has support outside the measurement subspace: {0}")]
    Support(String),

    #[error("probability model error: {0}")]
    Model(String),

    #[error("matrix is not {property} (worst violation {violation:e})")]
    Matrix { property: &'static str, violation: f64 },

    #[error("photon number {found} exceeds the simulator cap of {cap}")]
    PhotonCap { found: u32, cap: u32 },

    #[error("likelihood is -inf on every grid point; phases are not identifiable from these counts")]
    NonIdentifiable,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter { name, reason: reason.into() }
}
