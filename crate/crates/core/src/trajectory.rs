//! Conditioned integrators and the trajectory/ensemble drivers.
//!
//! All three modes share the same photocurrent plumbing: every step draws one
//! Wiener increment `dW(t)`, forms the measured increment
//! `I(t) dt = sqrt(gamma) x_c(t) dt + dW(t)`, and pushes it into a
//! [`DelayLine`] whose output is the increment fed back at `t + tau`. The same
//! `dW` therefore appears in the measurement back-action at `t` and in the
//! feedback drive at `t + tau`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::bloch::{
    bloch_from_polar, polar_from_bloch, wrap_angle, BlochVector, PolarState, DEFAULT_PURE_TOLERANCE,
};
use crate::deterministic::{feedback_gains, Gains};
use crate::error::{Error, Result};
use crate::sde::{DelayLine, NoiseStream};
use crate::stats::{BatchAccumulator, EnsembleEstimate};

/// Norm beyond which a Bloch step is treated as numerically unstable.
const BLOWUP_NORM: f64 = 2.0;

/// Relative slack allowed when checking that `tau` is a multiple of `dt`.
const DELAY_GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Full stochastic Bloch equations for `(x, y, z)`.
    Bloch3d,
    /// Pure-state angle equation (`r = 1` exactly).
    Theta,
    /// Equatorial target. Uses the one-dimensional `x` equation without
    /// delay and the full Bloch equations with equatorial gains otherwise.
    Equator,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Bloch3d => "bloch3d",
            Mode::Theta => "theta",
            Mode::Equator => "equator",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bloch3d" => Ok(Mode::Bloch3d),
            "theta" => Ok(Mode::Theta),
            "equator" => Ok(Mode::Equator),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode '{other}' (expected bloch3d, theta or equator)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub gamma: f64,
    pub theta0: f64,
    /// Loop delay; must be an integer multiple of `dt`.
    pub tau: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Samples with `t <= burn_in` are excluded from time averages.
    pub burn_in: f64,
    pub seed: u64,
    /// First noise stream; ensemble member `j` uses `stream_index + j`.
    pub stream_index: u64,
    pub mode: Mode,
    pub initial_state: BlochVector,
    /// Replaces the Markovian gains designed for `theta0`.
    pub gains: Option<Gains>,
    /// Averaging block for batch-means error bars.
    pub batch_length: f64,
}

impl SimConfig {
    pub fn new(mode: Mode, theta0: f64, tau: f64, dt: f64, t_end: f64) -> Self {
        Self {
            gamma: 1.0,
            theta0,
            tau,
            dt,
            t_end,
            burn_in: 50.0_f64.min(0.5 * t_end),
            seed: 0,
            stream_index: 0,
            mode,
            initial_state: BlochVector::GROUND,
            gains: None,
            batch_length: 10.0,
        }
    }

    /// Sets `gamma` and rescales the default burn-in and batch length.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self.burn_in = (50.0 / gamma).min(0.5 * self.t_end);
        self.batch_length = 10.0 / gamma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stream_index(mut self, stream_index: u64) -> Self {
        self.stream_index = stream_index;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_batch_length(mut self, batch_length: f64) -> Self {
        self.batch_length = batch_length;
        self
    }

    pub fn with_initial_state(mut self, v: BlochVector) -> Self {
        self.initial_state = v;
        self
    }

    pub fn with_gains(mut self, gains: Gains) -> Self {
        self.gains = Some(gains);
        self
    }

    /// Number of steps spanned by the delay.
    pub fn delay_steps(&self) -> usize {
        (self.tau / self.dt).round() as usize
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Gains actually used by the integrator.
    pub fn effective_gains(&self) -> Gains {
        if let Some(g) = self.gains {
            return g;
        }
        match self.mode {
            Mode::Equator => Gains {
                lambda: -0.5 * self.gamma.sqrt(),
                alpha: 0.0,
                equatorial: true,
            },
            _ => feedback_gains(self.theta0, self.gamma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if self.dt > 1e-2 / self.gamma * (1.0 + 1e-12) {
            return bad(format!("dt = {} exceeds 0.01/gamma", self.dt));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return bad(format!("tau must be >= 0, got {}", self.tau));
        }
        if self.tau > 0.0 {
            if self.dt > self.tau * (1.0 + 1e-12) {
                return bad(format!("dt = {} exceeds tau = {}", self.dt, self.tau));
            }
            let grid = self.delay_steps() as f64 * self.dt;
            if (grid - self.tau).abs() > DELAY_GRID_TOLERANCE * self.tau {
                return bad(format!(
                    "tau = {} is not an integer multiple of dt = {} (nearest {grid})",
                    self.tau, self.dt
                ));
            }
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be > 0, got {}", self.t_end));
        }
        if !(self.burn_in >= 0.0) || self.burn_in >= self.t_end {
            return bad(format!(
                "burn_in = {} must lie in [0, t_end = {})",
                self.burn_in, self.t_end
            ));
        }
        if !(self.batch_length > 0.0) {
            return bad(format!(
                "batch_length must be > 0, got {}",
                self.batch_length
            ));
        }
        if !self.initial_state.is_physical(DEFAULT_PURE_TOLERANCE) {
            return bad("initial state lies outside the Bloch ball".into());
        }
        if self.mode == Mode::Theta {
            let p = polar_from_bloch(&self.initial_state, DEFAULT_PURE_TOLERANCE)?;
            if (p.r - 1.0).abs() > 1e-6 {
                return bad(format!(
                    "theta mode needs a pure initial state, got r = {}",
                    p.r
                ));
            }
        }
        if self.mode == Mode::Equator && self.tau == 0.0 && self.initial_state.x.abs() > 1.0 {
            return bad("equator mode needs |x| <= 1".into());
        }
        Ok(())
    }
}

/// One step's measured photocurrent increment, `I dt = sqrt(gamma) x_c dt + dW`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HomodyneSample {
    pub value: f64,
}

#[inline]
pub fn homodyne_sample(x_c: f64, dw: f64, dt: f64, gamma: f64) -> HomodyneSample {
    HomodyneSample {
        value: gamma.sqrt() * x_c * dt + dw,
    }
}

/// Photocurrent driving the feedback in a Bloch step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackCurrent {
    /// Increment measured one delay earlier (zero during warmup).
    Delayed(HomodyneSample),
    /// Zero delay: the feedback acts on the increment being measured in
    /// this same step, which adds the Itô cross term between measurement
    /// back-action and feedback rotation.
    Immediate,
}

/// One Euler–Maruyama step of the conditioned Bloch equations.
pub fn sbe_step(
    v: &BlochVector,
    feedback: FeedbackCurrent,
    g: &Gains,
    gamma: f64,
    dw: f64,
    dt: f64,
) -> Result<BlochVector> {
    let BlochVector { x, y, z } = *v;
    let sg = gamma.sqrt();
    let current = match feedback {
        FeedbackCurrent::Delayed(s) => s.value,
        FeedbackCurrent::Immediate => homodyne_sample(x, dw, dt, gamma).value,
    };
    // rotation angle about y from the drive plus the fed-back current
    let rot = 2.0 * g.alpha * dt + 2.0 * g.lambda * current;
    let damp = 2.0 * g.lambda * g.lambda;

    // measurement back-action direction
    let nx = sg * (1.0 - x * x + z);
    let ny = -sg * x * y;
    let nz = -sg * (x + x * z);

    let mut dx = -(0.5 * gamma + damp) * x * dt + rot * z + nx * dw;
    let dy = -0.5 * gamma * y * dt + ny * dw;
    let mut dz = -rot * x - (gamma + damp) * z * dt - gamma * dt + nz * dw;

    if let FeedbackCurrent::Immediate = feedback {
        dx += 2.0 * g.lambda * nz * dt;
        dz -= 2.0 * g.lambda * nx * dt;
    }

    let out = BlochVector::new(x + dx, y + dy, z + dz);
    let norm = out.norm();
    if !(norm <= BLOWUP_NORM) {
        return Err(Error::StateBlowup { step: 0, norm });
    }
    Ok(out)
}

/// Angle update driven by an already-formed delayed photocurrent increment.
#[inline]
fn theta_step_with_current(
    theta: f64,
    current: f64,
    dw_now: f64,
    g: &Gains,
    gamma: f64,
    dt: f64,
) -> f64 {
    let (s, c) = theta.sin_cos();
    let drift = 2.0 * g.alpha + 0.5 * gamma * (2.0 + c) * s;
    theta + drift * dt + 2.0 * g.lambda * current + gamma.sqrt() * (1.0 + c) * dw_now
}

/// One step of the pure-state angle equation.
///
/// The delayed arguments must be zero while the loop is still filling.
pub fn theta_step(
    theta_now: f64,
    theta_delayed: f64,
    dw_now: f64,
    dw_delayed: f64,
    g: &Gains,
    gamma: f64,
    dt: f64,
) -> f64 {
    let current = homodyne_sample(theta_delayed.sin(), dw_delayed, dt, gamma).value;
    wrap_angle(theta_step_with_current(
        theta_now, current, dw_now, g, gamma, dt,
    ))
}

/// Markovian equatorial `x` equation, `dx = sqrt(gamma)(1 - x^2) dW`,
/// clamped to `[-1, 1]`.
#[inline]
pub fn equator_step(x: f64, dw: f64, gamma: f64) -> f64 {
    (x + gamma.sqrt() * (1.0 - x * x) * dw).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseProvenance {
    pub generator: &'static str,
    pub seed: u64,
    pub stream_index: u64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub config: SimConfig,
    pub provenance: NoiseProvenance,
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    /// Principal Bloch angle `atan2(x, z)` at each time.
    pub thetas: Vec<f64>,
    /// Steps where the state had to be pulled back into the unit ball.
    pub guard_activations: usize,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max |1 - r|` over the record.
    pub fn max_radius_defect(&self) -> f64 {
        self.states
            .iter()
            .map(|v| (1.0 - v.norm()).abs())
            .fold(0.0, f64::max)
    }
}

struct RunSummary {
    guard_activations: usize,
}

/// Drives one trajectory, handing `(step, t, theta, state)` to `observe`
/// for the initial point and after every step.
fn integrate<F>(c: &SimConfig, stream_index: u64, mut observe: F) -> Result<RunSummary>
where
    F: FnMut(usize, f64, f64, &BlochVector),
{
    c.validate()?;
    let gamma = c.gamma;
    let dt = c.dt;
    let g = c.effective_gains();
    let n = c.n_steps();
    let mut noise = NoiseStream::new(c.seed, stream_index, dt)?;
    let mut delay = DelayLine::new(c.delay_steps(), 0.0);
    let mut guard = 0usize;

    let theta_of = |v: &BlochVector| {
        if v.x == 0.0 && v.z == 0.0 {
            0.0
        } else {
            wrap_angle(v.x.atan2(v.z))
        }
    };

    match (c.mode, c.tau > 0.0) {
        (Mode::Theta, _) => {
            let mut theta = polar_from_bloch(&c.initial_state, DEFAULT_PURE_TOLERANCE)?.theta;
            let mut v = bloch_from_polar(&PolarState::pure(theta));
            observe(0, 0.0, theta, &v);
            for step in 1..=n {
                let dw = noise.next_increment();
                let measured = homodyne_sample(v.x, dw, dt, gamma).value;
                let fed_back = delay.push_and_read_delayed(measured);
                theta = wrap_angle(theta_step_with_current(theta, fed_back, dw, &g, gamma, dt));
                let (s, co) = theta.sin_cos();
                v = BlochVector::new(s, 0.0, co);
                observe(step, step as f64 * dt, theta, &v);
            }
        }
        (Mode::Equator, false) => {
            let mut v = c.initial_state;
            let sg = gamma.sqrt();
            observe(0, 0.0, theta_of(&v), &v);
            for step in 1..=n {
                let dw = noise.next_increment();
                let raw = v.x + sg * (1.0 - v.x * v.x) * dw;
                if raw.abs() > 1.0 {
                    guard += 1;
                }
                let x = equator_step(v.x, dw, gamma);
                let y = v.y - 0.5 * gamma * v.y * dt - sg * v.x * v.y * dw;
                let z = v.z - 0.5 * gamma * v.z * dt - sg * v.x * v.z * dw;
                v = BlochVector::new(x, y, z);
                if v.norm_sqr() > 1.0 {
                    v = v.scale(1.0 / v.norm());
                    guard += 1;
                }
                observe(step, step as f64 * dt, theta_of(&v), &v);
            }
        }
        (Mode::Bloch3d, _) | (Mode::Equator, true) => {
            let mut v = c.initial_state;
            let markov = c.delay_steps() == 0;
            observe(0, 0.0, theta_of(&v), &v);
            for step in 1..=n {
                let dw = noise.next_increment();
                let feedback = if markov {
                    FeedbackCurrent::Immediate
                } else {
                    let measured = homodyne_sample(v.x, dw, dt, gamma).value;
                    FeedbackCurrent::Delayed(HomodyneSample {
                        value: delay.push_and_read_delayed(measured),
                    })
                };
                v = sbe_step(&v, feedback, &g, gamma, dw, dt).map_err(|e| match e {
                    Error::StateBlowup { norm, .. } => Error::StateBlowup { step, norm },
                    other => other,
                })?;
                let r2 = v.norm_sqr();
                if r2 > 1.0 {
                    v = v.scale(1.0 / r2.sqrt());
                    guard += 1;
                }
                observe(step, step as f64 * dt, theta_of(&v), &v);
            }
        }
    }
    Ok(RunSummary {
        guard_activations: guard,
    })
}

/// Integrates one conditioned trajectory, recording every step.
pub fn simulate_trajectory(c: &SimConfig) -> Result<TrajectoryRecord> {
    let n = c.n_steps() + 1;
    let mut times = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    let summary = integrate(c, c.stream_index, |_, t, theta, v| {
        times.push(t);
        thetas.push(theta);
        states.push(*v);
    })?;
    Ok(TrajectoryRecord {
        config: c.clone(),
        provenance: NoiseProvenance {
            generator: "chacha12",
            seed: c.seed,
            stream_index: c.stream_index,
        },
        times,
        states,
        thetas,
        guard_activations: summary.guard_activations,
    })
}

fn accumulate_one(c: &SimConfig, stream_index: u64) -> Result<(BatchAccumulator, usize)> {
    let batch_steps = ((c.batch_length / c.dt).round() as usize).max(1);
    let mut acc = BatchAccumulator::new(batch_steps);
    let burn_in = c.burn_in;
    let summary = integrate(c, stream_index, |_, t, _, v| {
        if t > burn_in {
            acc.push(v);
        }
    })?;
    Ok((acc, summary.guard_activations))
}

/// Time-averaged state and purity pooled over `n_traj` independent
/// trajectories, with batch-means error bars.
///
/// Trajectories run in parallel on disjoint noise streams; the reduction is
/// done in trajectory order so the result does not depend on scheduling.
pub fn simulate_ensemble(c: &SimConfig, n_traj: usize) -> Result<EnsembleEstimate> {
    if n_traj == 0 {
        return Err(Error::InvalidConfig("n_traj must be >= 1".into()));
    }
    c.validate()?;
    let parts: Vec<Result<(BatchAccumulator, usize)>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|j| accumulate_one(c, c.stream_index + j))
        .collect();
    let mut pooled: Option<BatchAccumulator> = None;
    let mut guard = 0;
    for part in parts {
        let (acc, g) = part?;
        guard += g;
        match pooled.as_mut() {
            Some(p) => p.merge(acc),
            None => pooled = Some(acc),
        }
    }
    let mut est = pooled
        .expect("n_traj >= 1")
        .estimate(c.batch_length, c.gamma)?;
    est.guard_activations = guard;
    Ok(est)
}

/// Integrates the linearised excited-state equation
/// `d(dtheta) = [-2 gamma dtheta(t - tau) + (3 gamma / 2) dtheta(t)] dt
///              - 2 sqrt(gamma) [dW(t - tau) - dW(t)]`
/// and returns the batch-means estimate of `<dtheta^2>` after burn-in.
pub fn linearized_excited_variance(c: &SimConfig, n_traj: usize) -> Result<crate::stats::Estimate> {
    c.validate()?;
    if n_traj == 0 {
        return Err(Error::InvalidConfig("n_traj must be >= 1".into()));
    }
    let run = |j: u64| -> Result<Vec<f64>> {
        let gamma = c.gamma;
        let sg = gamma.sqrt();
        let dt = c.dt;
        let mut noise = NoiseStream::new(c.seed, c.stream_index + j, dt)?;
        let cap = c.delay_steps();
        let mut theta_line = DelayLine::new(cap, 0.0);
        let mut dw_line = DelayLine::new(cap, 0.0);
        let batch_steps = ((c.batch_length / dt).round() as usize).max(1);
        let mut batches = Vec::new();
        let (mut sum, mut count) = (0.0, 0usize);
        let mut d = 0.0f64;
        for step in 1..=c.n_steps() {
            let dw = noise.next_increment();
            let d_delayed = theta_line.push_and_read_delayed(d);
            let dw_delayed = dw_line.push_and_read_delayed(dw);
            d += (-2.0 * gamma * d_delayed + 1.5 * gamma * d) * dt - 2.0 * sg * (dw_delayed - dw);
            if !d.is_finite() || d.abs() > 1e6 {
                return Err(Error::StateBlowup {
                    step,
                    norm: d.abs(),
                });
            }
            if step as f64 * dt > c.burn_in {
                sum += d * d;
                count += 1;
                if count == batch_steps {
                    batches.push(sum / count as f64);
                    sum = 0.0;
                    count = 0;
                }
            }
        }
        Ok(batches)
    };
    let parts: Vec<Result<Vec<f64>>> = (0..n_traj as u64).into_par_iter().map(run).collect();
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    crate::stats::estimate_from_batches(&all)
}

/// True for targets at `+-pi/2`, where the Markovian stationary state is
/// not unique.
pub fn is_equatorial_target(theta0: f64) -> bool {
    (theta0.abs() - FRAC_PI_2).abs() < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::purity;
    use crate::deterministic::{drift_steady_state, AtomParams};
    use std::f64::consts::PI;

    #[test]
    fn homodyne_examples() {
        assert_eq!(homodyne_sample(0.0, 0.01, 1e-3, 1.0).value, 0.01);
        assert!((homodyne_sample(1.0, 0.0, 1e-3, 1.0).value - 1e-3).abs() < 1e-18);
        let theta: f64 = 0.4;
        let s = homodyne_sample(theta.sin(), 0.02, 1e-3, 4.0).value;
        assert!((s - (2.0 * theta.sin() * 1e-3 + 0.02)).abs() < 1e-15);
    }

    #[test]
    fn sbe_markov_fixed_point() {
        let theta0 = PI / 6.0;
        let g = feedback_gains(theta0, 1.0);
        let v = bloch_from_polar(&PolarState::pure(theta0));
        let dt: f64 = 1e-4;
        for dw in [-4.0 * dt.sqrt(), -0.003, 0.0, 0.001, 4.0 * dt.sqrt()] {
            let out = sbe_step(&v, FeedbackCurrent::Immediate, &g, 1.0, dw, dt).unwrap();
            assert!(out.max_abs_diff(&v) < 1e-6, "dw {dw}: {out:?}");
        }
    }

    #[test]
    fn sbe_free_decay_from_excited() {
        let dt = 1e-3;
        let out = sbe_step(
            &BlochVector::EXCITED,
            FeedbackCurrent::Delayed(HomodyneSample::default()),
            &Gains::NONE,
            1.0,
            0.0,
            dt,
        )
        .unwrap();
        // z' = -gamma (1 + z) = -2 gamma at z = 1
        assert!((out.z - (1.0 - 2.0 * dt)).abs() < 1e-15);
        assert_eq!(out.x, 0.0);
    }

    #[test]
    fn sbe_without_feedback_matches_master_equation_drift() {
        let (gamma, alpha, dt) = (1.4, 0.35, 1e-3);
        let v = BlochVector::new(0.3, 0.1, -0.5);
        let out = sbe_step(
            &v,
            FeedbackCurrent::Delayed(HomodyneSample::default()),
            &Gains::new(0.0, alpha),
            gamma,
            0.0,
            dt,
        )
        .unwrap();
        let d = (out - v).scale(1.0 / dt);
        assert!((d.x - (-gamma * v.x / 2.0 + 2.0 * alpha * v.z)).abs() < 1e-12);
        assert!((d.y - (-gamma * v.y / 2.0)).abs() < 1e-12);
        assert!((d.z - (-2.0 * alpha * v.x - gamma * (1.0 + v.z))).abs() < 1e-12);
    }

    #[test]
    fn sbe_keeps_plane() {
        let g = feedback_gains(0.7, 1.0);
        let mut v = BlochVector::new(0.2, 0.0, -0.9);
        for k in 0..100 {
            let dw = 0.01 * ((k as f64) * 1.7).sin();
            let fb = if k % 2 == 0 {
                FeedbackCurrent::Immediate
            } else {
                FeedbackCurrent::Delayed(HomodyneSample { value: dw * 0.3 })
            };
            v = sbe_step(&v, fb, &g, 1.0, dw, 1e-3).unwrap();
            assert_eq!(v.y, 0.0);
        }
    }

    #[test]
    fn sbe_reports_blowup() {
        let v = BlochVector::new(0.0, 0.0, 1.0);
        let kick = FeedbackCurrent::Delayed(HomodyneSample { value: 5.0 });
        let err = sbe_step(&v, kick, &Gains::new(-1.0, 0.0), 1.0, 0.0, 1e-3);
        assert!(matches!(err, Err(Error::StateBlowup { .. })));
    }

    /// Off the unit circle the pure-state drift of `theta` follows from the
    /// delayed Bloch equations by the chain rule: with an independent delayed
    /// current and no measurement noise, one Bloch step and one angle step
    /// agree to second order in dt.
    #[test]
    fn theta_step_matches_bloch_step_to_first_order() {
        let g = Gains::new(-0.6, 0.13);
        let (gamma, dt) = (1.3, 1e-6);
        for theta in [-2.5, -0.8, 0.0, 0.4, 1.9, 3.0] {
            let current = 2e-4;
            let v = bloch_from_polar(&PolarState::pure(theta));
            let b = sbe_step(
                &v,
                FeedbackCurrent::Delayed(HomodyneSample { value: current }),
                &g,
                gamma,
                0.0,
                dt,
            )
            .unwrap();
            let t = theta_step_with_current(theta, current, 0.0, &g, gamma, dt);
            let tb = b.x.atan2(b.z);
            assert!((wrap_angle(t - tb)).abs() < 1e-9, "theta {theta}");
        }
    }

    #[test]
    fn theta_step_examples() {
        let theta0 = PI / 6.0;
        let g = feedback_gains(theta0, 1.0);
        let dt = 1e-3;
        for dw in [-0.1, 0.0, 0.05] {
            let next = theta_step(theta0, theta0, dw, dw, &g, 1.0, dt);
            assert!((next - theta0).abs() < 1e-15, "dw {dw}");
        }
        let g = feedback_gains(PI, 1.0);
        assert!((theta_step(PI, PI, 0.3, 0.3, &g, 1.0, dt) - PI).abs() < 1e-15);
    }

    #[test]
    fn theta_step_linearises_around_excited_state() {
        // d(dtheta) ~ [-2 gamma dtheta(t-tau) + 1.5 gamma dtheta(t)] dt
        //             - 2 sqrt(gamma) [dW(t-tau) - dW(t)]
        let gamma = 2.0;
        let g = feedback_gains(0.0, gamma);
        let (d_now, d_del, dw, dwd, dt) = (1e-4, -2e-4, 3e-3, -1e-3, 1e-3);
        let next = theta_step(d_now, d_del, dw, dwd, &g, gamma, dt);
        let lin = d_now + (-2.0 * gamma * d_del + 1.5 * gamma * d_now) * dt
            - 2.0 * gamma.sqrt() * (dwd - dw);
        // remainder is O(d * dw) from the multiplicative noise and O(d^3)
        assert!((next - lin).abs() < 1e-8, "{next} vs {lin}");
    }

    #[test]
    fn equator_step_examples() {
        assert_eq!(equator_step(1.0, 0.3, 1.0), 1.0);
        assert_eq!(equator_step(-1.0, -0.3, 1.0), -1.0);
        assert!((equator_step(0.0, 0.02, 1.0) - 0.02).abs() < 1e-18);
        assert_eq!(equator_step(0.9, 10.0, 1.0), 1.0);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(Mode::Theta, 0.0, 0.02, 1e-3, 10.0);
        assert!(ok.validate().is_ok());
        assert_eq!(ok.delay_steps(), 20);
        assert!(SimConfig::new(Mode::Theta, 0.0, 0.0205, 1e-3, 10.0)
            .validate()
            .is_err());
        assert!(SimConfig::new(Mode::Theta, 0.0, 0.0005, 1e-3, 10.0)
            .validate()
            .is_err());
        assert!(SimConfig::new(Mode::Theta, 0.0, 0.0, 0.02, 10.0)
            .validate()
            .is_err());
        assert!(SimConfig::new(Mode::Theta, 0.0, 0.0, 1e-3, 10.0)
            .with_burn_in(10.0)
            .validate()
            .is_err());
        let mixed = SimConfig::new(Mode::Theta, 0.0, 0.0, 1e-3, 10.0)
            .with_initial_state(BlochVector::new(0.0, 0.0, -0.5));
        assert!(mixed.validate().is_err());
        assert_eq!("theta".parse::<Mode>().unwrap(), Mode::Theta);
        assert!("bogus".parse::<Mode>().is_err());
    }

    #[test]
    fn record_length_and_purity_in_theta_mode() {
        let c = SimConfig::new(Mode::Theta, PI / 6.0, 0.02, 1e-3, 2.0).with_seed(5);
        let rec = simulate_trajectory(&c).unwrap();
        assert_eq!(rec.len(), 2001);
        assert_eq!(rec.times[0], 0.0);
        assert!((rec.times[2000] - 2.0).abs() < 1e-12);
        assert!(rec.states.iter().all(|v| (purity(v) - 1.0).abs() < 1e-12));
        assert!(rec.thetas.iter().all(|t| *t > -PI && *t <= PI));
    }

    #[test]
    fn trajectories_are_reproducible() {
        for mode in [Mode::Theta, Mode::Bloch3d, Mode::Equator] {
            let c = SimConfig::new(mode, 1.0, 0.01, 1e-3, 1.0).with_seed(9);
            let a = simulate_trajectory(&c).unwrap();
            let b = simulate_trajectory(&c).unwrap();
            assert!(a
                .states
                .iter()
                .zip(&b.states)
                .all(|(p, q)| p.to_array().map(f64::to_bits) == q.to_array().map(f64::to_bits)));
        }
    }

    #[test]
    fn ground_target_is_exactly_stable() {
        for tau in [0.0, 0.05] {
            let c = SimConfig::new(Mode::Theta, PI, tau, 1e-3, 20.0)
                .with_burn_in(1.0)
                .with_batch_length(1.0)
                .with_seed(1);
            let est = simulate_ensemble(&c, 2).unwrap();
            assert!((est.purity.mean - 1.0).abs() < 1e-12);
            assert!(est.mean.max_abs_diff(&BlochVector::GROUND) < 1e-12);
        }
    }

    /// Zero-delay Bloch and angle integrators driven by one fine Brownian
    /// path, coarsened by summing increments. Euler–Maruyama has strong
    /// order 1/2 for this multiplicative noise, so the pathwise gap shrinks
    /// like sqrt(dt) and is dominated by the transient out of the ground
    /// state; the median over seeds is what is stable enough to assert.
    #[test]
    fn zero_delay_bloch_and_theta_agree_pathwise() {
        let theta0 = PI / 6.0;
        let g = feedback_gains(theta0, 1.0);
        let fine_dt = 2.5e-5;
        let n = (10.0 / fine_dt) as usize;
        let groups = [16usize, 4, 1];
        let mut worst = vec![Vec::new(); groups.len()];
        for seed in 0..8 {
            let mut s = NoiseStream::new(seed, 0, fine_dt).unwrap();
            let dws: Vec<f64> = (0..n).map(|_| s.next_increment()).collect();
            for (k, &group) in groups.iter().enumerate() {
                let dt = fine_dt * group as f64;
                let (mut v, mut theta) = (BlochVector::GROUND, PI);
                let mut gap: f64 = 0.0;
                for chunk in dws.chunks(group) {
                    let dw: f64 = chunk.iter().sum();
                    v = sbe_step(&v, FeedbackCurrent::Immediate, &g, 1.0, dw, dt).unwrap();
                    if v.norm() > 1.0 {
                        v = v.scale(1.0 / v.norm());
                    }
                    theta = theta_step(theta, theta, dw, dw, &g, 1.0, dt);
                    gap = gap.max(wrap_angle(v.x.atan2(v.z) - theta).abs());
                }
                worst[k].push(gap);
            }
        }
        let medians: Vec<f64> = worst
            .iter_mut()
            .map(|w| {
                w.sort_by(f64::total_cmp);
                0.5 * (w[3] + w[4])
            })
            .collect();
        assert!(medians[1] < 1e-2, "{medians:?}");
        assert!(
            medians[0] > medians[1] && medians[1] > medians[2],
            "{medians:?}"
        );
    }

    #[test]
    fn driven_ensemble_reproduces_master_equation_steady_state() {
        let (gamma, alpha) = (1.0, 0.5);
        let c = SimConfig::new(Mode::Bloch3d, 0.0, 0.0, 1e-3, 12.0)
            .with_gains(Gains::new(0.0, alpha))
            .with_seed(31);
        let n = 10_000;
        let finals: Vec<BlochVector> = (0..n as u64)
            .into_par_iter()
            .map(|j| {
                let rec = simulate_trajectory(&c.clone().with_stream_index(j)).unwrap();
                *rec.states.last().unwrap()
            })
            .collect();
        let mean = finals
            .iter()
            .fold(BlochVector::default(), |a, v| a + *v)
            .scale(1.0 / n as f64);
        let var = finals
            .iter()
            .fold(BlochVector::default(), |a, v| {
                let d = *v - mean;
                a + BlochVector::new(d.x * d.x, d.y * d.y, d.z * d.z)
            })
            .scale(1.0 / (n - 1) as f64);
        let target = drift_steady_state(&AtomParams::new(gamma, alpha).unwrap());
        let se_x = (var.x / n as f64).sqrt();
        let se_z = (var.z / n as f64).sqrt();
        assert!(
            (mean.x - target.x).abs() < 3.0 * se_x,
            "x {} vs {} (se {se_x})",
            mean.x,
            target.x
        );
        assert!(
            (mean.z - target.z).abs() < 3.0 * se_z,
            "z {} vs {} (se {se_z})",
            mean.z,
            target.z
        );
    }

    #[test]
    fn equatorial_x_is_a_martingale() {
        let n = 10_000u64;
        let c = SimConfig::new(Mode::Equator, FRAC_PI_2, 0.0, 1e-3, 5.0)
            .with_initial_state(BlochVector::new(0.0, 0.0, -1.0))
            .with_seed(4);
        let xs: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let rec = simulate_trajectory(&c.clone().with_stream_index(j)).unwrap();
                rec.states.last().unwrap().x
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 * (var / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn mirrored_target_gives_mirrored_trajectory() {
        // theta0 -> -theta0 flips alpha; with dW -> -dW the delayed dynamics
        // map x -> -x. Negating the noise is the same as reflecting the
        // trajectory, so compare against an explicit mirrored integration.
        let theta0 = 0.9;
        let (g, gm) = (feedback_gains(theta0, 1.0), feedback_gains(-theta0, 1.0));
        let dt = 1e-3;
        let cap = 20;
        let mut noise = NoiseStream::new(3, 0, dt).unwrap();
        let (mut a, mut b) = (BlochVector::GROUND, BlochVector::GROUND);
        let (mut la, mut lb) = (DelayLine::new(cap, 0.0), DelayLine::new(cap, 0.0));
        for _ in 0..5000 {
            let dw = noise.next_increment();
            let sa = la.push_and_read_delayed(homodyne_sample(a.x, dw, dt, 1.0).value);
            let sb = lb.push_and_read_delayed(homodyne_sample(b.x, -dw, dt, 1.0).value);
            a = sbe_step(
                &a,
                FeedbackCurrent::Delayed(HomodyneSample { value: sa }),
                &g,
                1.0,
                dw,
                dt,
            )
            .unwrap();
            b = sbe_step(
                &b,
                FeedbackCurrent::Delayed(HomodyneSample { value: sb }),
                &gm,
                1.0,
                -dw,
                dt,
            )
            .unwrap();
            assert!((a.x + b.x).abs() < 1e-10 && (a.z - b.z).abs() < 1e-10);
        }
    }
}
