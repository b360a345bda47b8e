use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state leaves the x-z plane (|y| = {y:e})")]
    OutOfPlane { y: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(&'static str),

    #[error("dimension mismatch: state {state}, drift {drift}, diffusion {diffusion}")]
    DimensionMismatch {
        state: usize,
        drift: usize,
        diffusion: usize,
    },

    #[error("integration blew up at step {step} (|v| = {norm:.3}); reduce dt")]
    StateBlowup { step: usize, norm: f64 },

    #[error("no samples remain after burn-in")]
    EmptyWindow,

    #[error("only {got} complete batches, need at least {need}")]
    TooFewBatches { got: usize, need: usize },

    #[error("gamma*tau = {gamma_tau} is outside the validity range [0, 0.25)")]
    OutOfValidity { gamma_tau: f64 },

    #[error("spectral denominator vanishes near omega = {omega:.6} (delay at or above the stability threshold)")]
    PoleEncountered { omega: f64 },

    #[error("quadrature resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
