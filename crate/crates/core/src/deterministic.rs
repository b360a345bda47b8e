//! Unconditioned dynamics: steady states of the driven atom, Markovian gain
//! design, and the feedback-modified Liouvillian.

use num_complex::Complex64;

use crate::bloch::{bloch_from_polar, BlochVector, DensityMatrix, Matrix2, PolarState};
use crate::error::{Error, Result};

/// `|cos(theta0)|` below this marks an equatorial target.
const EQUATOR_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomParams {
    /// Spontaneous emission rate, > 0.
    pub gamma: f64,
    /// Driving amplitude (half the Rabi frequency).
    pub alpha: f64,
}

impl AtomParams {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gamma must be > 0, got {gamma}"
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite, got {alpha}"
            )));
        }
        Ok(Self { gamma, alpha })
    }
}

/// Driving and feedback amplitudes for a target angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    /// Feedback amplitude multiplying the photocurrent in the drive.
    pub lambda: f64,
    pub alpha: f64,
    /// Target sits on the equator, where the stationary state is not unique.
    pub equatorial: bool,
}

impl Gains {
    pub const NONE: Gains = Gains {
        lambda: 0.0,
        alpha: 0.0,
        equatorial: false,
    };

    pub fn new(lambda: f64, alpha: f64) -> Self {
        Self {
            lambda,
            alpha,
            equatorial: false,
        }
    }
}

/// Stationary Bloch vector of the driven, damped atom without feedback.
pub fn drift_steady_state(p: &AtomParams) -> BlochVector {
    let (g, a) = (p.gamma, p.alpha);
    let den = g * g + 8.0 * a * a;
    BlochVector::new(-4.0 * a * g / den, 0.0, -g * g / den)
}

/// Markovian gains that make `|theta0>` a stationary pure state:
/// `lambda = -(sqrt(gamma)/2)(1 + cos theta0)`, `alpha = (gamma/4) sin theta0 cos theta0`.
pub fn feedback_gains(theta0: f64, gamma: f64) -> Gains {
    let (s, c) = theta0.sin_cos();
    Gains {
        lambda: -0.5 * gamma.sqrt() * (1.0 + c),
        alpha: 0.25 * gamma * s * c,
        equatorial: c.abs() < EQUATOR_TOLERANCE,
    }
}

fn dissipator(a: &Matrix2, rho: &Matrix2) -> Matrix2 {
    let ad = a.adjoint();
    let ada = ad * *a;
    *a * *rho * ad - (ada * *rho + *rho * ada).scale(0.5.into())
}

/// `d rho/dt = -i[alpha sigma_y, rho] + D[sqrt(gamma) sigma - i lambda sigma_y] rho`.
///
/// The result is a traceless Hermitian matrix, not a density matrix.
pub fn feedback_liouvillian_apply(m: &DensityMatrix, g: &Gains, gamma: f64) -> Matrix2 {
    let rho = *m.matrix();
    let sy = Matrix2::sigma_y();
    let i = Complex64::i();
    let h = sy.scale(g.alpha.into());
    let l = Matrix2::lowering().scale(gamma.sqrt().into()) - sy.scale(i * g.lambda);
    (h * rho - rho * h).scale(-i) + dissipator(&l, &rho)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusPoint {
    pub theta0: f64,
    pub state: BlochVector,
    /// The Markovian stationary state is not unique here.
    pub unstable: bool,
}

/// Markovian feedback locus: the pure state at every target angle.
pub fn markov_locus(theta0_grid: &[f64], gamma: f64) -> Vec<LocusPoint> {
    theta0_grid
        .iter()
        .map(|&theta0| LocusPoint {
            theta0,
            state: bloch_from_polar(&PolarState::pure(theta0)),
            unstable: feedback_gains(theta0, gamma).equatorial,
        })
        .collect()
}
