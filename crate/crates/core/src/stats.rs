//! Monte Carlo reductions.
//!
//! All ensemble means go through [`pairwise_sum`] over a sample vector laid
//! out by realization index, so results do not depend on how the samples were
//! scheduled across workers.

use num_complex::Complex64;
use serde::Serialize;

/// Heavy-tail flag threshold on the largest single contribution to the sum.
pub const HEAVY_TAIL_FRACTION: f64 = 0.5;

const PAIRWISE_BLOCK: usize = 32;

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Monte Carlo estimate of a nonnegative expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Largest single sample divided by the sample total.
    pub max_sample_fraction: f64,
    /// Set when the empirical mean cannot be trusted: one sample dominates the
    /// sum, or the caller flagged the parameter as near-critical.
    pub diverged_flag: bool,
}

impl MomentEstimate {
    /// Builds the estimate from nonnegative samples. `near_boundary` forces the
    /// flag on.
    pub fn from_samples(samples: &[f64], near_boundary: bool) -> Self {
        let n = samples.len();
        assert!(n >= 2, "need at least two samples");
        let total = pairwise_sum(samples);
        let mean = total / n as f64;
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        let stderr = (var / n as f64).sqrt();
        let max = samples.iter().cloned().fold(0.0_f64, f64::max);
        let max_sample_fraction = if total > 0.0 {
            (max / total).clamp(0.0, 1.0)
        } else {
            0.0
        };
        MomentEstimate {
            mean,
            stderr,
            n_samples: n,
            max_sample_fraction,
            diverged_flag: near_boundary
                || max_sample_fraction > HEAVY_TAIL_FRACTION
                || !mean.is_finite(),
        }
    }

    /// `|self.mean - value| <= k * stderr`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }

    /// Whether the `k`-sigma intervals of two estimates intersect.
    pub fn overlaps(&self, other: &MomentEstimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * (self.stderr + other.stderr)
    }
}

/// Mean of complex samples with separate standard errors for the real and
/// imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexEstimate {
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_samples: usize,
}

impl ComplexEstimate {
    pub fn from_samples(samples: &[Complex64]) -> Self {
        let n = samples.len();
        assert!(n >= 2, "need at least two samples");
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        let (mean_re, stderr_re) = mean_stderr(&re);
        let (mean_im, stderr_im) = mean_stderr(&im);
        ComplexEstimate {
            mean_re,
            mean_im,
            stderr_re,
            stderr_im,
            n_samples: n,
        }
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.mean_re, self.mean_im)
    }

    /// Componentwise `k`-sigma agreement with `value`.
    pub fn within(&self, value: Complex64, k: f64) -> bool {
        (self.mean_re - value.re).abs() <= k * self.stderr_re
            && (self.mean_im - value.im).abs() <= k * self.stderr_im
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}
