//! Itô noise, delayed-signal buffering and the Euler–Maruyama update.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A reproducible stream of Wiener increments `dW ~ N(0, dt)`.
///
/// Streams with the same seed but different `stream_index` are independent
/// ChaCha streams, so trajectories of an ensemble can be generated in any
/// order or in parallel without changing their noise.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    stream_index: u64,
    dt: f64,
    sqrt_dt: f64,
    rng: ChaCha12Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_index: u64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {dt}")));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Ok(Self {
            seed,
            stream_index,
            dt,
            sqrt_dt: dt.sqrt(),
            rng,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn next_increment(&mut self) -> f64 {
        let n: f64 = StandardNormal.sample(&mut self.rng);
        n * self.sqrt_dt
    }
}

/// Fixed-length ring buffer that returns what was pushed `capacity` pushes ago.
///
/// Until `capacity` samples have been stored the buffer answers with the
/// warmup value. A capacity of zero passes samples straight through.
#[derive(Debug, Clone)]
pub struct DelayLine {
    storage: Vec<f64>,
    head: usize,
    fill_count: usize,
    warmup: f64,
}

impl DelayLine {
    pub fn new(capacity: usize, warmup: f64) -> Self {
        Self {
            storage: vec![0.0; capacity],
            head: 0,
            fill_count: 0,
            warmup,
        }
    }

    pub fn capacity(&self) -> usize {
        self.storage.len()
    }

    pub fn fill_count(&self) -> usize {
        self.fill_count
    }

    pub fn is_warm(&self) -> bool {
        self.fill_count >= self.storage.len()
    }

    #[inline]
    pub fn push_and_read_delayed(&mut self, sample: f64) -> f64 {
        let cap = self.storage.len();
        if cap == 0 {
            return sample;
        }
        let out = if self.fill_count >= cap {
            self.storage[self.head]
        } else {
            self.fill_count += 1;
            self.warmup
        };
        self.storage[self.head] = sample;
        self.head += 1;
        if self.head == cap {
            self.head = 0;
        }
        out
    }
}

/// `state + drift dt + diffusion dW`, with no renormalisation.
pub fn euler_maruyama_step(
    state: &[f64],
    drift: &[f64],
    diffusion: &[f64],
    dw: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    if state.len() != drift.len() || state.len() != diffusion.len() {
        return Err(Error::DimensionMismatch {
            state: state.len(),
            drift: drift.len(),
            diffusion: diffusion.len(),
        });
    }
    Ok(state
        .iter()
        .zip(drift)
        .zip(diffusion)
        .map(|((s, a), b)| s + a * dt + b * dw)
        .collect())
}
