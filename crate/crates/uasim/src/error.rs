use thiserror::Error;

/// Errors produced by the covariance pipeline, the Fock oracle and the
/// analytic channel models.
#[derive(Debug, Clone, Error)]
pub enum UaError {
    #[error("matrix is not symmetric: max |V - V^T| = {max_asymmetry:.3e}")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("covariance violates the uncertainty relation: min eig(V + i\u{3a9}) = {min_eig:.3e}")]
    Unphysical { min_eig: f64 },

    #[error("matrix is not symplectic: max |S\u{3a9}S^T - \u{3a9}| = {deviation:.3e}")]
    NotSymplectic { deviation: f64 },

    #[error("reference state is not pure: max |\u{3bd} - 1| = {deviation:.3e}")]
    NotPure { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid mode index {mode} for {modes}-mode system")]
    ModeIndex { mode: usize, modes: usize },

    #[error("heralding block is numerically singular: smallest pivot {pivot:.3e}")]
    SingularHerald { pivot: f64 },

    #[error("mean photon number {nbar:.6} on mode {mode} is >= 1; the product approximation does not apply")]
    PhotonNumberTooLarge { mode: usize, nbar: f64 },

    #[error("fidelity {value:.12} exceeds 1 beyond the round-off allowance")]
    FidelityOvershoot { value: f64 },

    #[error("matrix factorization failed: {0}")]
    Numerical(String),

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("noise record has {got} draws but the circuit stack needs {expected}")]
    NoiseRecordLength { got: usize, expected: usize },

    #[error("truncation leakage {leakage:.3e} exceeds the budget {budget:.3e} at cutoff {cutoff}")]
    TruncationLeakage {
        leakage: f64,
        budget: f64,
        cutoff: usize,
    },

    #[error("requested Fock tensor of {bytes} bytes exceeds the {limit}-byte limit")]
    FockTensorTooLarge { bytes: usize, limit: usize },

    #[error("vacuum projection weight {weight:.3e} is below {min:.1e}; heralding outcome is numerically empty")]
    VacuumWeightTooSmall { weight: f64, min: f64 },

    #[error("model parameter out of range: {0}")]
    ModelRange(String),
}

pub type Result<T> = std::result::Result<T, UaError>;
