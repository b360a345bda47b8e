//! Time averages and batch-means error bars.
//!
//! Trajectory samples are strongly autocorrelated (correlation time of order
//! `1/gamma`), so errors are estimated from the scatter of means over long
//! contiguous blocks rather than from individual samples.

use crate::bloch::{purity, BlochVector};
use crate::error::{Error, Result};
use crate::trajectory::TrajectoryRecord;

/// Fewest batches for which an error bar is reported.
pub const MIN_BATCHES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimate {
    pub mean: BlochVector,
    pub std_error: BlochVector,
    /// Purity of the averaged state, `|mean|^2`.
    pub purity: Estimate,
    pub n_batches: usize,
    pub batch_length: f64,
    /// Post-burn-in simulated time in units of the correlation time `1/gamma`.
    pub n_eff: f64,
    pub guard_activations: usize,
}

/// Mean of the recorded states with `t > burn_in`.
pub fn time_average(rec: &TrajectoryRecord, burn_in: f64) -> Result<BlochVector> {
    let mut sum = [0.0; 3];
    let mut count = 0usize;
    for (t, v) in rec.times.iter().zip(&rec.states) {
        if *t > burn_in {
            sum[0] += v.x;
            sum[1] += v.y;
            sum[2] += v.z;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyWindow);
    }
    Ok(BlochVector::from(sum).scale(1.0 / count as f64))
}

/// Mean and standard error from a list of batch means.
pub fn estimate_from_batches(batches: &[f64]) -> Result<Estimate> {
    let n = batches.len();
    if n < MIN_BATCHES {
        return Err(Error::TooFewBatches {
            got: n,
            need: MIN_BATCHES,
        });
    }
    let mean = batches.iter().sum::<f64>() / n as f64;
    let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Estimate {
        mean,
        std_error: (var / n as f64).sqrt(),
    })
}

/// Batch-means estimate for a series sampled every `dt`, using blocks of
/// `batch_length` time. A trailing partial block is dropped.
pub fn batch_means_error(series: &[f64], dt: f64, batch_length: f64) -> Result<Estimate> {
    if !(dt > 0.0) || !(batch_length > 0.0) {
        return Err(Error::InvalidConfig(
            "dt and batch_length must be positive".into(),
        ));
    }
    let size = ((batch_length / dt).round() as usize).max(1);
    let batches: Vec<f64> = series
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    estimate_from_batches(&batches)
}

/// Streaming batch-means accumulator for Bloch vectors.
#[derive(Debug, Clone)]
pub struct BatchAccumulator {
    batch_size: usize,
    sum: [f64; 3],
    count: usize,
    batches: Vec<[f64; 3]>,
}

impl BatchAccumulator {
    pub fn new(batch_size: usize) -> Self {
        assert!(batch_size > 0, "batch size must be positive");
        Self {
            batch_size,
            sum: [0.0; 3],
            count: 0,
            batches: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, v: &BlochVector) {
        self.sum[0] += v.x;
        self.sum[1] += v.y;
        self.sum[2] += v.z;
        self.count += 1;
        if self.count == self.batch_size {
            let k = 1.0 / self.batch_size as f64;
            self.batches
                .push([self.sum[0] * k, self.sum[1] * k, self.sum[2] * k]);
            self.sum = [0.0; 3];
            self.count = 0;
        }
    }

    /// Appends the completed batches of another trajectory; its partial
    /// batch is discarded.
    pub fn merge(&mut self, other: BatchAccumulator) {
        assert_eq!(self.batch_size, other.batch_size);
        self.batches.extend(other.batches);
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn batches(&self) -> &[[f64; 3]] {
        &self.batches
    }

    /// Component means, their errors, and the purity of the mean state.
    ///
    /// The purity error uses the linearisation
    /// `P_b = 2 m . m_b - |m|^2` of `|m|^2` around the pooled mean `m`.
    pub fn estimate(&self, batch_length: f64, gamma: f64) -> Result<EnsembleEstimate> {
        let n = self.batches.len();
        if n < MIN_BATCHES {
            return Err(Error::TooFewBatches {
                got: n,
                need: MIN_BATCHES,
            });
        }
        let mut comp = [Estimate::default(); 3];
        for (k, c) in comp.iter_mut().enumerate() {
            let col: Vec<f64> = self.batches.iter().map(|b| b[k]).collect();
            *c = estimate_from_batches(&col)?;
        }
        let mean = BlochVector::new(comp[0].mean, comp[1].mean, comp[2].mean);
        let p = purity(&mean);
        let linear: Vec<f64> = self
            .batches
            .iter()
            .map(|b| 2.0 * (mean.x * b[0] + mean.y * b[1] + mean.z * b[2]) - p)
            .collect();
        let p_err = estimate_from_batches(&linear)?.std_error;
        Ok(EnsembleEstimate {
            mean,
            std_error: BlochVector::new(comp[0].std_error, comp[1].std_error, comp[2].std_error),
            purity: Estimate {
                mean: p,
                std_error: p_err,
            },
            n_batches: n,
            batch_length,
            n_eff: n as f64 * batch_length * gamma,
            guard_activations: 0,
        })
    }
}
