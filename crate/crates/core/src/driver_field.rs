//! The finite-Fourier complex Gaussian driver
//!
//! ```text
//! S(x,t) = Σ_{n=-N}^{N} √ε_n s_n exp(2iπ(n x + n² t))
//! ```
//!
//! with independent circular complex Gaussian `s_n`, `⟨s_n s_m*⟩ = δ_nm`.
//!
//! Modes are stored in the order `0, 1, -1, 2, -2, …`, which places each
//! `(j, -j)` pair in adjacent slots.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::ComplexEstimate;

/// Tolerance on `Σ ε_n = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Storage slot of Fourier index `n`.
pub fn mode_slot(n: i64) -> usize {
    match n {
        0 => 0,
        n if n > 0 => (2 * n - 1) as usize,
        n => (2 * (-n)) as usize,
    }
}

/// Fourier index stored in `slot`.
pub fn mode_number(slot: usize) -> i64 {
    if slot == 0 {
        0
    } else if slot % 2 == 1 {
        slot.div_ceil(2) as i64
    } else {
        -((slot / 2) as i64)
    }
}

/// `exp(2iπ·frac)` after reducing the argument mod 1.
pub(crate) fn cis_turns(turns: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * turns.rem_euclid(1.0))
}

/// Phase of mode `n` at `(x, t)` in turns, reduced mod 1 term by term.
pub(crate) fn mode_turns(n: i64, x: f64, t: f64) -> f64 {
    let nf = n as f64;
    (nf * x).rem_euclid(1.0) + (nf * nf * t).rem_euclid(1.0)
}

/// Spectral weights `ε_n`, `n = -N..=N`: a probability vector over modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralWeights {
    n_max: usize,
    eps: Vec<f64>,
}

impl SpectralWeights {
    /// Builds weights from `(n, ε_n)` pairs; unlisted modes get zero weight.
    ///
    /// Rejects negative or non-finite weights, indices outside `[-N, N]`,
    /// duplicates, and sums differing from 1 by more than [`WEIGHT_SUM_TOL`].
    /// Weights are never renormalized.
    pub fn from_pairs(n_max: usize, pairs: &[(i64, f64)]) -> Result<Self> {
        let m = 2 * n_max + 1;
        let mut eps = vec![0.0; m];
        let mut seen = vec![false; m];
        for &(n, e) in pairs {
            if n.unsigned_abs() as usize > n_max {
                return Err(Error::InvalidWeights(format!(
                    "mode {n} outside [-{n_max}, {n_max}]"
                )));
            }
            if !e.is_finite() || e < 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "weight of mode {n} must be finite and >= 0, got {e}"
                )));
            }
            let slot = mode_slot(n);
            if seen[slot] {
                return Err(Error::InvalidWeights(format!("mode {n} listed twice")));
            }
            seen[slot] = true;
            eps[slot] = e;
        }
        Self::from_slots(n_max, eps)
    }

    /// Builds weights from a vector already in storage order.
    pub fn from_slots(n_max: usize, eps: Vec<f64>) -> Result<Self> {
        if eps.len() != 2 * n_max + 1 {
            return Err(Error::InvalidWeights(format!(
                "expected {} weights for N = {n_max}, got {}",
                2 * n_max + 1,
                eps.len()
            )));
        }
        if let Some(e) = eps.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "weights must be finite and >= 0, got {e}"
            )));
        }
        let sum: f64 = eps.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights must sum to 1 (within {WEIGHT_SUM_TOL:e}), got {sum}"
            )));
        }
        Ok(SpectralWeights { n_max, eps })
    }

    /// `ε_0 = 0.2, ε_1 = 0.5, ε_{-1} = 0.3`.
    pub fn canonical() -> Self {
        Self::from_pairs(1, &[(0, 0.2), (1, 0.5), (-1, 0.3)]).expect("valid")
    }

    /// `ε_0 = 1`.
    pub fn single_mode() -> Self {
        Self::from_pairs(0, &[(0, 1.0)]).expect("valid")
    }

    /// `ε_1 = ε_{-1} = 1/2`.
    pub fn symmetric_pair() -> Self {
        Self::from_pairs(1, &[(1, 0.5), (-1, 0.5)]).expect("valid")
    }

    /// `N`.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `M = 2N + 1`.
    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    /// `ε_n`, zero outside `[-N, N]`.
    pub fn eps(&self, n: i64) -> f64 {
        if n.unsigned_abs() as usize > self.n_max {
            0.0
        } else {
            self.eps[mode_slot(n)]
        }
    }

    /// Weights in storage order.
    pub fn slots(&self) -> &[f64] {
        &self.eps
    }

    /// `(n, ε_n)` for every mode, in storage order.
    pub fn pairs(&self) -> Vec<(i64, f64)> {
        self.eps
            .iter()
            .enumerate()
            .map(|(slot, &e)| (mode_number(slot), e))
            .collect()
    }
}

/// One sample of the coefficient vector `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverRealization {
    pub s: Vec<Complex64>,
    pub seed: u64,
}

impl DriverRealization {
    /// Wraps an explicit coefficient vector (storage order).
    pub fn from_coefficients(s: Vec<Complex64>, seed: u64) -> Self {
        DriverRealization { s, seed }
    }
}

/// Draws `s_n = (a + ib)/√2` with `a, b` independent standard normals.
pub fn sample_realization(w: &SpectralWeights, seed: u64) -> DriverRealization {
    let mut rng = rng_from_seed(seed);
    let s = (0..w.dim())
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a, b) * FRAC_1_SQRT_2
        })
        .collect();
    DriverRealization { s, seed }
}

/// Realization `index` of the ensemble rooted at `base_seed`.
pub fn ensemble_member(w: &SpectralWeights, base_seed: u64, index: u64) -> DriverRealization {
    sample_realization(w, derive_seed(base_seed, index))
}

/// `S(x, t)`; periodic with period 1 in both arguments.
pub fn eval_field(w: &SpectralWeights, r: &DriverRealization, x: f64, t: f64) -> Complex64 {
    w.eps
        .iter()
        .zip(&r.s)
        .enumerate()
        .filter(|(_, (e, _))| **e > 0.0)
        .map(|(slot, (e, s))| {
            let n = mode_number(slot);
            *s * e.sqrt() * cis_turns(mode_turns(n, x, t))
        })
        .sum()
}

/// `C(dx, dt) = Σ_n ε_n exp(2iπ(n dx + n² dt))`.
pub fn covariance(w: &SpectralWeights, dx: f64, dt: f64) -> Complex64 {
    w.eps
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 0.0)
        .map(|(slot, e)| cis_turns(mode_turns(mode_number(slot), dx, dt)) * *e)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    /// Estimate of `⟨S(dx,dt) S*(0,0)⟩`.
    pub covariance: ComplexEstimate,
    /// Estimate of `⟨S(dx,dt) S(0,0)⟩`, which vanishes for a circular driver.
    pub pseudo_covariance: ComplexEstimate,
}

/// Ensemble estimate of the covariance and pseudo-covariance at lag `(dx, dt)`.
pub fn empirical_covariance(
    w: &SpectralWeights,
    dx: f64,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CovarianceEstimate> {
    if n_samples < 2 {
        return Err(Error::param(
            "n_samples",
            format!("need >= 2, got {n_samples}"),
        ));
    }
    let (cov, pseudo): (Vec<Complex64>, Vec<Complex64>) = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let r = ensemble_member(w, seed, i);
            let a = eval_field(w, &r, dx, dt);
            let b = eval_field(w, &r, 0.0, 0.0);
            (a * b.conj(), a * b)
        })
        .unzip();
    Ok(CovarianceEstimate {
        covariance: ComplexEstimate::from_samples(&cov),
        pseudo_covariance: ComplexEstimate::from_samples(&pseudo),
    })
}

/// `∫₀¹ |S(x,t)|² dt` in closed form.
///
/// Orthogonality of `exp(2iπn²t)` on `[0,1]` keeps only the `m = ±n` terms:
/// `Σ ε_n|s_n|² + 2 Σ_{j≥1} √(ε_j ε_{-j}) Re(s_j s_{-j}* e^{4iπjx})`.
pub fn intensity_time_integral_at(w: &SpectralWeights, r: &DriverRealization, x: f64) -> f64 {
    let diag: f64 = w.eps.iter().zip(&r.s).map(|(e, s)| e * s.norm_sqr()).sum();
    let cross: f64 = (1..=w.n_max as i64)
        .map(|j| {
            let (p, q) = (mode_slot(j), mode_slot(-j));
            let amp = (w.eps[p] * w.eps[q]).sqrt();
            if amp == 0.0 {
                return 0.0;
            }
            2.0 * amp * (r.s[p] * r.s[q].conj() * cis_turns(2.0 * j as f64 * x)).re
        })
        .sum();
    (diag + cross).max(0.0)
}

/// `∫₀¹ |S(0,t)|² dt`.
pub fn intensity_time_integral(w: &SpectralWeights, r: &DriverRealization) -> f64 {
    intensity_time_integral_at(w, r, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn slot_layout_round_trips() {
        assert_eq!(
            (0..7).map(mode_number).collect::<Vec<_>>(),
            vec![0, 1, -1, 2, -2, 3, -3]
        );
        for n in -5..=5 {
            assert_eq!(mode_number(mode_slot(n)), n);
        }
    }

    #[test]
    fn weights_validation() {
        assert!(SpectralWeights::from_pairs(1, &[(0, 0.5), (1, 0.4)]).is_err());
        assert!(SpectralWeights::from_pairs(1, &[(0, 1.2), (1, -0.2)]).is_err());
        assert!(SpectralWeights::from_pairs(1, &[(2, 1.0)]).is_err());
        assert!(SpectralWeights::from_pairs(1, &[(1, 0.5), (1, 0.5)]).is_err());
        assert!(SpectralWeights::from_pairs(1, &[(0, f64::NAN)]).is_err());
        assert!(SpectralWeights::from_slots(1, vec![1.0]).is_err());
        let w = SpectralWeights::canonical();
        assert_eq!(w.dim(), 3);
        assert_eq!(w.eps(-1), 0.3);
        assert_eq!(w.eps(5), 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = SpectralWeights::canonical();
        assert_eq!(sample_realization(&w, 42), sample_realization(&w, 42));
        assert_ne!(sample_realization(&w, 42).s, sample_realization(&w, 43).s);
    }

    #[test]
    fn second_moments_of_coefficients() {
        let w = SpectralWeights::canonical();
        let n = 100_000;
        let (abs2, sq): (Vec<Complex64>, Vec<Complex64>) = (0..n)
            .map(|i| {
                let s0 = ensemble_member(&w, 11, i).s[0];
                (c(s0.norm_sqr(), 0.0), s0 * s0)
            })
            .unzip();
        let abs2 = ComplexEstimate::from_samples(&abs2);
        assert!(
            (abs2.mean_re - 1.0).abs() <= 3.0 * abs2.stderr_re,
            "{abs2:?}"
        );
        let sq = ComplexEstimate::from_samples(&sq);
        assert!(sq.within(c(0.0, 0.0), 3.0), "{sq:?}");
    }

    #[test]
    fn field_edge_cases() {
        let w = SpectralWeights::canonical();
        let zero = DriverRealization::from_coefficients(vec![c(0.0, 0.0); 3], 0);
        assert_eq!(eval_field(&w, &zero, 0.3, 0.7), c(0.0, 0.0));

        let one = SpectralWeights::single_mode();
        let r = DriverRealization::from_coefficients(vec![c(1.0, 0.0)], 0);
        for (x, t) in [(0.0, 0.0), (0.37, 0.91), (-2.5, 13.25)] {
            assert!((eval_field(&one, &r, x, t) - c(1.0, 0.0)).norm() < 1e-15);
        }

        let r = sample_realization(&w, 5);
        for (x, t) in [(0.1, 0.2), (0.77, -0.4)] {
            let d = eval_field(&w, &r, x + 1.0, t) - eval_field(&w, &r, x, t);
            assert!(d.norm() < 1e-12);
            let d = eval_field(&w, &r, x, t + 1.0) - eval_field(&w, &r, x, t);
            assert!(d.norm() < 1e-12);
        }
    }

    #[test]
    fn covariance_values() {
        let w = SpectralWeights::canonical();
        assert!((covariance(&w, 0.0, 0.0) - c(1.0, 0.0)).norm() < 1e-15);
        // 0.2 + 0.5 e^{iπ} + 0.3 e^{-iπ}
        assert!((covariance(&w, 0.5, 0.0) - c(-0.6, 0.0)).norm() < 1e-15);
        for (dx, dt) in [(0.13, 0.4), (0.9, -0.21)] {
            let a = covariance(&w, dx, dt);
            assert!((covariance(&w, -dx, -dt) - a.conj()).norm() < 1e-15);
            assert!((covariance(&w, dx + 1.0, dt - 1.0) - a).norm() < 1e-12);
            assert!(a.norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn empirical_covariance_matches() {
        let w = SpectralWeights::canonical();
        assert!(empirical_covariance(&w, 0.0, 0.0, 1, 0).is_err());
        let est = empirical_covariance(&w, 0.0, 0.0, 100_000, 3).unwrap();
        assert!(est.covariance.within(c(1.0, 0.0), 3.0), "{est:?}");
        assert!(est.pseudo_covariance.within(c(0.0, 0.0), 3.0), "{est:?}");
        let est = empirical_covariance(&w, 0.5, 0.0, 100_000, 4).unwrap();
        assert!(est.covariance.within(c(-0.6, 0.0), 3.0), "{est:?}");
    }

    #[test]
    fn intensity_integral_edge_cases() {
        let w = SpectralWeights::canonical();
        let zero = DriverRealization::from_coefficients(vec![c(0.0, 0.0); 3], 0);
        assert_eq!(intensity_time_integral(&w, &zero), 0.0);
        let one = SpectralWeights::single_mode();
        let r = DriverRealization::from_coefficients(vec![c(1.0, 1.0)], 0);
        assert!((intensity_time_integral(&one, &r) - 2.0).abs() < 1e-15);
    }
}
