//! Quantum-trajectory simulation of homodyne-mediated feedback on a
//! driven, damped two-level atom, with and without a loop delay.
//!
//! The crate is organised bottom-up:
//!
//! * [`bloch`]: Bloch-vector, polar and density-matrix representations.
//! * [`deterministic`]: closed-form steady states, Markovian gain design and
//!   the feedback-modified Liouvillian.
//! * [`sde`]: seeded Wiener increments, the delay line and the Euler–Maruyama
//!   update.
//! * [`trajectory`]: the conditioned integrators and the trajectory/ensemble
//!   drivers.
//! * [`stats`]: burn-in, time averages and batch-means error bars.
//! * [`analytics`]: the purity law for the excited state, the spectral
//!   integral for the angle variance, and the delay stability threshold.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod bloch;
pub mod deterministic;
mod error;
pub mod sde;
pub mod stats;
pub mod trajectory;

pub use analytics::{
    analytic_purity, delta_theta_variance, spectral_integrand, spectral_report,
    stability_threshold, SpectralParams, SpectralReport,
};
pub use bloch::{
    bloch_from_density, bloch_from_polar, density_from_bloch, polar_from_bloch, purity,
    BlochVector, DensityMatrix, Matrix2, PolarState, DEFAULT_PURE_TOLERANCE,
};
pub use deterministic::{
    drift_steady_state, feedback_gains, feedback_liouvillian_apply, markov_locus, AtomParams,
    Gains, LocusPoint,
};
pub use error::{Error, Result};
pub use sde::{euler_maruyama_step, DelayLine, NoiseStream};
pub use stats::{
    batch_means_error, estimate_from_batches, time_average, BatchAccumulator, EnsembleEstimate,
    Estimate,
};
pub use trajectory::{
    equator_step, homodyne_sample, linearized_excited_variance, sbe_step, simulate_ensemble,
    simulate_trajectory, theta_step, FeedbackCurrent, HomodyneSample, Mode, NoiseProvenance,
    SimConfig, TrajectoryRecord,
};
