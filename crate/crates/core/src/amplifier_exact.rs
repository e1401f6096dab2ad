//! The diffraction-free amplifier: the exact moment generating function of
//! the time-integrated intensity and its Monte Carlo counterpart.
//!
//! Rotating the coefficient vector into the eigenbasis of `∫₀¹γ(0,t)dt` turns
//! the Gaussian average into a product of exponential integrals,
//! `⟨exp(λ∫₀¹|S(0,t)|²dt)⟩ = Π_n 1/(1 − λκ_n)`, finite iff `λ max κ < 1`.
//! Sampling near that boundary only ever sees a heavy tail, so Monte Carlo
//! estimates there are flagged and never used to certify divergence.

use rayon::prelude::*;
use serde::Serialize;

use crate::driver_field::{
    ensemble_member, intensity_time_integral, intensity_time_integral_at, DriverRealization,
    SpectralWeights,
};
use crate::error::{Error, Result};
use crate::gamma_spectral::{eigen_closed_form, HermitianMatrix};
use crate::stats::MomentEstimate;

/// `1 − λκ` at or below this counts as divergent.
pub const DIVERGENCE_TOL: f64 = 1e-12;

/// Estimates for `λ > NEAR_BOUNDARY · λ̄_c` are always flagged.
pub const NEAR_BOUNDARY: f64 = 0.9;

/// Value of a moment generating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Mgf {
    Finite(f64),
    Divergent,
}

impl Mgf {
    pub fn is_finite(&self) -> bool {
        matches!(self, Mgf::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Mgf::Finite(v) => Some(*v),
            Mgf::Divergent => None,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("must be finite and >= 0, got {lambda}"),
        ));
    }
    Ok(())
}

/// `Π_n 1/(1 − λκ_n)`, or [`Mgf::Divergent`] once any factor is non-positive.
pub fn mgf_from_kappas(kappas: &[f64], lambda: f64) -> Result<Mgf> {
    check_lambda(lambda)?;
    let mut prod = 1.0;
    for &k in kappas {
        let gap = 1.0 - lambda * k;
        if gap <= DIVERGENCE_TOL {
            return Ok(Mgf::Divergent);
        }
        prod /= gap;
    }
    Ok(Mgf::Finite(prod))
}

/// `⟨exp(λ ∫₀¹ |S(0,t)|² dt)⟩` in closed form.
pub fn mgf_exact(w: &SpectralWeights, lambda: f64) -> Result<Mgf> {
    let dec = eigen_closed_form(w)?;
    mgf_from_kappas(&dec.kappas, lambda)
}

/// Sample mean of `exp(λ ∫₀¹ |S(0,t)|² dt)` over `n_samples` realizations.
pub fn mgf_monte_carlo(
    w: &SpectralWeights,
    lambda: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    check_lambda(lambda)?;
    check_samples(n_samples)?;
    let lbc = eigen_closed_form(w)?.lambda_bar_c;
    let samples: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| (lambda * intensity_time_integral(w, &ensemble_member(w, seed, i))).exp())
        .collect();
    Ok(MomentEstimate::from_samples(
        &samples,
        lambda > NEAR_BOUNDARY * lbc,
    ))
}

/// Sample mean of `exp(λ s† G s)` for an arbitrary Hermitian `G`, with `s`
/// drawn exactly as in [`mgf_monte_carlo`].
pub fn quadratic_form_mgf_monte_carlo(
    w: &SpectralWeights,
    g: &HermitianMatrix,
    lambda: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    check_lambda(lambda)?;
    check_samples(n_samples)?;
    if g.dim() != w.dim() {
        return Err(Error::param(
            "g",
            format!("dimension {} != {}", g.dim(), w.dim()),
        ));
    }
    let samples: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| (lambda * g.quadratic_form(&ensemble_member(w, seed, i).s)).exp())
        .collect();
    Ok(MomentEstimate::from_samples(&samples, false))
}

/// `exp(λ ∫₀¹ |S(x,t)|² dt)`: the solution at time 1 with no kinetic term.
pub fn pointwise_amplification(
    w: &SpectralWeights,
    r: &DriverRealization,
    lambda: f64,
    x: f64,
) -> f64 {
    (lambda * intensity_time_integral_at(w, r, x)).exp()
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < 100 {
        return Err(Error::param(
            "n_samples",
            format!("need >= 100, got {n_samples}"),
        ));
    }
    Ok(())
}
