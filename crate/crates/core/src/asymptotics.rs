//! Large-amplitude behavior along the top eigen-direction.
//!
//! For `σ = z·e_m` the rotated coupling is time independent,
//! `σ†P†γ(x,t)Pσ = [1/λ̄_c − α_m λ̄_c sin²(2πkx)]|z|²`, so the directional
//! integrand
//!
//! ```text
//! g(|z|) = e^{−|z|²} |u(0,1)|,   ∂ₜu = (i/2)∂ₓ²u + λ σ†P†γPσ u,   u(x,0) = 1
//! ```
//!
//! factorizes as `e^{(λ/λ̄_c − 1)|z|²} |v(0,1)|` where `v` feels only the
//! nonpositive sine-well gain `−λ|z|²α_m λ̄_c sin²(2πkx)`. Near the well
//! bottom `|v(0,1)| ≈ √2 exp(−|z| πk √(α_m λ λ̄_c))`, which decays too slowly
//! to compensate the Gaussian growth once `λ > λ̄_c`.
//!
//! All amplitudes are handled as logarithms; `g` overflows `f64` long before
//! the solver does.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2, TAU};

use crate::driver_field::SpectralWeights;
use crate::error::{Error, Result};
use crate::gamma_spectral::{eigen_closed_form, quadratic_form_direction, ModeDecomposition};
use crate::pde_solver::{evolve_static_potential, KineticKind, SolverConfig};
use num_complex::Complex64;

/// Minimum number of usable points in a decay fit.
pub const MIN_FIT_POINTS: usize = 6;

/// Default decay-fit window.
/// The linear decay law only sets in once the well is deep (`|z| ≳ 25` for k = 1).
pub const FIT_WINDOW: (f64, f64) = (30.0, 60.0);
pub const FIT_POINTS: usize = 8;

/// Spacing of the witness scan in `|z|`.
pub const WITNESS_STEP: f64 = 0.5;

/// Solver config for one `|z|`: diffraction, with `n_x` raised to
/// `max(base.n_x, next power of two ≥ 64·k·|z|)` to resolve the narrowing well
/// and `n_t` raised to the next power of two ≥ 128·k·|z|.
pub fn asymptotic_config(base: &SolverConfig, k: usize, z_abs: f64) -> SolverConfig {
    let need = (64.0 * k as f64 * z_abs).ceil().max(1.0) as usize;
    SolverConfig {
        n_x: base.n_x.max(need.next_power_of_two()),
        n_t: base.n_t.max((2 * need).next_power_of_two()),
        kinetic: KineticKind::Diffraction,
    }
}

/// `π k √(α_m λ λ̄_c)`: predicted exponential decay rate of `|v(0,1)|` in `|z|`.
pub fn predicted_decay_rate(dec: &ModeDecomposition, lambda: f64) -> f64 {
    PI * dec.k as f64 * (dec.alpha_m * lambda * dec.lambda_bar_c).sqrt()
}

/// `√2 exp(−|z| πk √(α_m λ λ̄_c))`.
pub fn predicted_sine_well_amplitude(dec: &ModeDecomposition, lambda: f64, z_abs: f64) -> f64 {
    SQRT_2 * (-z_abs * predicted_decay_rate(dec, lambda)).exp()
}

fn check_inputs(lambda: f64, z_abs: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("must be finite and >= 0, got {lambda}"),
        ));
    }
    if !(z_abs >= 0.0 && z_abs.is_finite()) {
        return Err(Error::param(
            "z_abs",
            format!("must be finite and >= 0, got {z_abs}"),
        ));
    }
    Ok(())
}

/// `ln g(|z|)`, with the gain built from the full matrix quadratic form
/// `σ†P†γ(x,0)Pσ`.
pub fn ln_directional_integrand(
    w: &SpectralWeights,
    lambda: f64,
    z_abs: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_inputs(lambda, z_abs)?;
    let dec = eigen_closed_form(w)?;
    ln_directional_with(w, &dec, lambda, z_abs, cfg)
}

fn ln_directional_with(
    w: &SpectralWeights,
    dec: &ModeDecomposition,
    lambda: f64,
    z_abs: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if z_abs == 0.0 {
        return Ok(0.0);
    }
    let c = asymptotic_config(cfg, dec.k, z_abs);
    let unit = Complex64::new(1.0, 0.0);
    let u = evolve_static_potential(
        |x| -quadratic_form_direction(w, x, 0.0, unit, dec),
        lambda * z_abs * z_abs,
        1.0,
        &c,
    )?;
    Ok(u.ln_abs_at(0) - z_abs * z_abs)
}

/// `g(|z|) = e^{−|z|²} |u(0,1)|`.
pub fn directional_integrand(
    w: &SpectralWeights,
    lambda: f64,
    z_abs: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    ln_directional_integrand(w, lambda, z_abs, cfg).map(f64::exp)
}

/// `ln |v(0,1)|` for the sine-well gain `−λ|z|²α_m λ̄_c sin²(2πkx)`.
pub fn ln_sine_well_amplitude(
    w: &SpectralWeights,
    lambda: f64,
    z_abs: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_inputs(lambda, z_abs)?;
    let dec = eigen_closed_form(w)?;
    ln_sine_well_with(&dec, lambda, z_abs, cfg)
}

fn ln_sine_well_with(
    dec: &ModeDecomposition,
    lambda: f64,
    z_abs: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if z_abs == 0.0 || dec.alpha_m == 0.0 {
        return Ok(0.0);
    }
    let c = asymptotic_config(cfg, dec.k, z_abs);
    let (k, depth) = (dec.k as f64, dec.alpha_m * dec.lambda_bar_c);
    let v = evolve_static_potential(
        |x| {
            let s = (TAU * (k * x).rem_euclid(1.0)).sin();
            depth * s * s
        },
        lambda * z_abs * z_abs,
        1.0,
        &c,
    )?;
    Ok(v.ln_abs_at(0))
}

/// `|v(0,1)|`.
pub fn sine_well_amplitude(
    w: &SpectralWeights,
    lambda: f64,
    z_abs: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    ln_sine_well_amplitude(w, lambda, z_abs, cfg).map(f64::exp)
}

/// One row of an asymptotic scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub z: f64,
    pub ln_g: f64,
    pub ln_v_abs: f64,
    /// `√2 exp(−|z| πk √(α_m λ λ̄_c))`.
    pub predicted: f64,
}

/// Evaluates `g` and `|v|` at every `|z|` in `z_grid`.
pub fn scan(
    w: &SpectralWeights,
    lambda: f64,
    z_grid: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<ScanPoint>> {
    for &z in z_grid {
        check_inputs(lambda, z)?;
    }
    let dec = eigen_closed_form(w)?;
    z_grid
        .par_iter()
        .map(|&z| {
            Ok(ScanPoint {
                z,
                ln_g: ln_directional_with(w, &dec, lambda, z, cfg)?,
                ln_v_abs: ln_sine_well_with(&dec, lambda, z, cfg)?,
                predicted: predicted_sine_well_amplitude(&dec, lambda, z),
            })
        })
        .collect()
}

/// Least-squares fit `ln|v(0,1)| ≈ ln(prefactor) + slope·|z|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub prefactor: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    /// Max relative deviation of the fitted exponential from the data.
    pub residual: f64,
    /// `−πk√(α_m λ λ̄_c)`.
    pub predicted_slope: f64,
    /// `√2`.
    pub predicted_prefactor: f64,
}

impl DecayFit {
    pub fn slope_relative_error(&self) -> f64 {
        (self.slope / self.predicted_slope - 1.0).abs()
    }

    /// `prefactor / √2`.
    pub fn prefactor_ratio(&self) -> f64 {
        self.prefactor / self.predicted_prefactor
    }
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// The default fit window `[30, 60]` with 8 points.
pub fn default_fit_grid() -> Vec<f64> {
    linspace(FIT_WINDOW.0, FIT_WINDOW.1, FIT_POINTS)
}

pub fn fit_decay(
    w: &SpectralWeights,
    lambda: f64,
    z_grid: &[f64],
    cfg: &SolverConfig,
) -> Result<DecayFit> {
    let dec = eigen_closed_form(w)?;
    if dec.alpha_m <= 0.0 {
        return Err(Error::param(
            "weights",
            "top mode has alpha_m = 0: no sine well to fit",
        ));
    }
    if z_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::param("z_grid", "must be strictly ascending"));
    }
    let points: Vec<(f64, f64)> = z_grid
        .par_iter()
        .map(|&z| {
            check_inputs(lambda, z)?;
            Ok((z, ln_sine_well_with(&dec, lambda, z, cfg)?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, lv)| lv.is_finite())
        .collect();
    fit_points(&points, predicted_decay_rate(&dec, lambda))
}

fn fit_points(points: &[(f64, f64)], rate: f64) -> Result<DecayFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::param(
            "z_grid",
            format!(
                "need >= {MIN_FIT_POINTS} usable points, got {}",
                points.len()
            ),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|(x, y)| ((intercept + slope * x - y).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        slope,
        prefactor: intercept.exp(),
        z_lo: points[0].0,
        z_hi: points[points.len() - 1].0,
        residual,
        predicted_slope: -rate,
        predicted_prefactor: SQRT_2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessPoint {
    pub z: f64,
    pub ln_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    /// `g` ends above 1 and increases over the last three grid points.
    pub diverged: bool,
    pub trace: Vec<WitnessPoint>,
}

/// Scans `g(|z|)` on `0, 0.5, …, z_max` and reports whether it grows past 1.
///
/// Growth of `g` contradicts `e^{−|σ|²}|∫…| → 0`, which integrability of
/// `⟨|E(0,1)|⟩` requires along every direction. The rule is a numerical
/// witness over a finite window, not a proof.
pub fn divergence_witness(
    w: &SpectralWeights,
    lambda: f64,
    z_max: f64,
    cfg: &SolverConfig,
) -> Result<WitnessReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("must be finite and > 0, got {lambda}"),
        ));
    }
    if !(z_max >= 3.0 * WITNESS_STEP && z_max.is_finite()) {
        return Err(Error::param(
            "z_max",
            format!(
                "need at least three grid points (z_max >= {}), got {z_max}",
                3.0 * WITNESS_STEP
            ),
        ));
    }
    let n = (z_max / WITNESS_STEP).ceil() as usize;
    let grid = linspace(0.0, n as f64 * WITNESS_STEP, n + 1);
    let dec = eigen_closed_form(w)?;
    let trace = grid
        .par_iter()
        .map(|&z| {
            Ok(WitnessPoint {
                z,
                ln_g: ln_directional_with(w, &dec, lambda, z, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WitnessReport {
        diverged: witness_rule(&trace),
        trace,
    })
}

fn witness_rule(trace: &[WitnessPoint]) -> bool {
    let n = trace.len();
    if n < 3 {
        return false;
    }
    let tail = &trace[n - 3..];
    tail[2].ln_g > 0.0 && tail[0].ln_g < tail[1].ln_g && tail[1].ln_g < tail[2].ln_g
}
