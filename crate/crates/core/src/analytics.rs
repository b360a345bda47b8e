//! Closed-form and quadrature results for feedback around the excited state.
//!
//! Linearising the angle equation about `theta0 = 0` gives a linear delay
//! equation whose stationary variance is a one-dimensional spectral integral.
//! For short delays the variance is `4 gamma tau`, hence the purity law
//! `P = 1 - 4 gamma tau`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Denominator magnitude treated as a pole.
const POLE_TOLERANCE: f64 = 1e-12;
/// Minimum cutoff in units of `1/tau`.
const MIN_CUTOFF_PERIODS: f64 = 100.0;
/// Minimum quadrature samples per oscillation period `2 pi / tau`.
const MIN_SAMPLES_PER_PERIOD: f64 = 20.0;
/// Fraction of the threshold beyond which the linearisation is suspect.
const NEAR_THRESHOLD: f64 = 0.9;

/// `P = 1 - 4 gamma tau`, valid for `gamma tau < 1/4`.
pub fn analytic_purity(gamma: f64, tau: f64) -> Result<f64> {
    let gt = gamma * tau;
    if !(gt >= 0.0) || gt >= 0.25 {
        return Err(Error::OutOfValidity { gamma_tau: gt });
    }
    Ok(1.0 - 4.0 * gt)
}

#[inline]
fn denominator(omega: f64, gamma: f64, tau: f64) -> f64 {
    let (s, c) = (omega * tau).sin_cos();
    let a = 1.5 - 2.0 * c;
    let b = omega / gamma - 2.0 * s;
    a * a + b * b
}

/// Spectral density of the linearised angle fluctuation; its integral over
/// `[0, inf)` is `<dtheta^2>`.
pub fn spectral_integrand(omega: f64, gamma: f64, tau: f64) -> Result<f64> {
    let den = denominator(omega, gamma, tau);
    if den < POLE_TOLERANCE {
        return Err(Error::PoleEncountered { omega });
    }
    let s = (0.5 * omega * tau).sin();
    Ok(16.0 * s * s / (PI * gamma * den))
}

/// Smallest delay at which the linear delay equation loses stability:
/// the spectral denominator first vanishes where `cos(omega tau) = 3/4` and
/// `omega = 2 gamma sin(omega tau)`.
pub fn stability_threshold(gamma: f64) -> f64 {
    let omega = gamma * 7f64.sqrt() / 2.0;
    0.75f64.acos() / omega
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub gamma: f64,
    pub tau: f64,
    /// Upper limit of the explicit quadrature; the rest is the closed-form tail.
    pub omega_max: f64,
    /// Number of quadrature intervals (rounded up to even for Simpson).
    pub n_points: usize,
}

impl SpectralParams {
    /// Default resolution: cutoff `max(200/tau, 1000 gamma)`, at least 50
    /// samples per oscillation period and a spacing no coarser than `gamma/10`.
    pub fn new(gamma: f64, tau: f64) -> Self {
        let omega_max = if tau > 0.0 {
            (2.0 * MIN_CUTOFF_PERIODS / tau).max(1000.0 * gamma)
        } else {
            1000.0 * gamma
        };
        let per_period = 50.0 * omega_max * tau / (2.0 * PI);
        let fine = 10.0 * omega_max / gamma;
        let n_points = per_period.max(fine).ceil() as usize;
        Self {
            gamma,
            tau,
            omega_max,
            n_points,
        }
    }

    pub fn with_omega_max(mut self, omega_max: f64) -> Self {
        self.omega_max = omega_max;
        self
    }

    pub fn with_n_points(mut self, n_points: usize) -> Self {
        self.n_points = n_points;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau must be >= 0, got {}",
                self.tau
            )));
        }
        if self.tau == 0.0 {
            return Ok(());
        }
        if self.omega_max < MIN_CUTOFF_PERIODS / self.tau * (1.0 - 1e-12) {
            return Err(Error::ResolutionTooCoarse(format!(
                "omega_max = {} is below {}/tau = {}",
                self.omega_max,
                MIN_CUTOFF_PERIODS,
                MIN_CUTOFF_PERIODS / self.tau
            )));
        }
        let needed = MIN_SAMPLES_PER_PERIOD * self.omega_max * self.tau / (2.0 * PI);
        if (self.n_points as f64) < needed {
            return Err(Error::ResolutionTooCoarse(format!(
                "n_points = {} gives fewer than {} samples per period (need {})",
                self.n_points,
                MIN_SAMPLES_PER_PERIOD,
                needed.ceil()
            )));
        }
        Ok(())
    }
}

/// `<dtheta^2>`: composite Simpson quadrature of [`spectral_integrand`] on
/// `[0, omega_max]` plus the averaged large-frequency tail
/// `8 gamma / (pi omega_max)`.
pub fn delta_theta_variance(p: &SpectralParams) -> Result<f64> {
    p.check()?;
    let (gamma, tau) = (p.gamma, p.tau);
    if tau == 0.0 {
        return Ok(0.0);
    }
    if tau >= stability_threshold(gamma) {
        return Err(Error::PoleEncountered {
            omega: gamma * 7f64.sqrt() / 2.0,
        });
    }
    let n = p.n_points + p.n_points % 2;
    let h = p.omega_max / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..n {
        let f = spectral_integrand(k as f64 * h, gamma, tau)?;
        if k % 2 == 1 {
            odd += f;
        } else {
            even += f;
        }
    }
    let ends = spectral_integrand(0.0, gamma, tau)? + spectral_integrand(p.omega_max, gamma, tau)?;
    let body = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
    let tail = 8.0 * gamma / (PI * p.omega_max);
    Ok(body + tail)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    pub gamma: f64,
    pub tau: f64,
    pub variance: f64,
    /// Short-delay asymptote `4 gamma tau`.
    pub asymptote: f64,
    /// `variance / asymptote` (NaN at zero delay).
    pub ratio: f64,
    pub threshold: f64,
    /// Delay is within 10% of the threshold: the quadrature is fine but the
    /// linearisation behind it is not.
    pub near_threshold: bool,
}

pub fn spectral_report(p: &SpectralParams) -> Result<SpectralReport> {
    let variance = delta_theta_variance(p)?;
    let asymptote = 4.0 * p.gamma * p.tau;
    let threshold = stability_threshold(p.gamma);
    Ok(SpectralReport {
        gamma: p.gamma,
        tau: p.tau,
        variance,
        asymptote,
        ratio: if asymptote > 0.0 {
            variance / asymptote
        } else {
            f64::NAN
        },
        threshold,
        near_threshold: p.tau >= NEAR_THRESHOLD * threshold,
    })
}
