//! Strang split-step Fourier solver on the unit circle for
//!
//! ```text
//! ∂ₜE = K ∂ₓ²E + g(x,t) E,   E(x,0) = 1,
//! ```
//!
//! with `K = i/2` (diffraction), `K = D` (diffusion) or `K = 0`, and a real
//! gain `g`: either the stochastic intensity `λ|S(x,t)|²` or `−scale·V(x,t)`
//! for a deterministic potential.
//!
//! A step is half a kinetic step in Fourier space, a full gain step using the
//! exact time integral of `g` over the step, and another half kinetic step.
//! Consecutive half kinetic steps are fused.
//!
//! The field is stored as `values · exp(log_scale)` and renormalized when its
//! magnitude leaves `[1e-150, 1e150]`, so strongly amplified or damped runs
//! never overflow.
//!
//! The evolution runs on the circle with periodic initial data; path integrals
//! over paths in ℝ with a 1-periodic potential reduce to exactly this problem.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::amplifier_exact::NEAR_BOUNDARY;
use crate::driver_field::{
    cis_turns, ensemble_member, mode_number, DriverRealization, SpectralWeights,
};
use crate::error::{Error, Result};
use crate::gamma_spectral::eigen_closed_form;
use crate::stats::MomentEstimate;

/// Number of uniform checkpoints recorded for norm monitoring.
pub const DEFAULT_CHECKPOINTS: usize = 16;

const RESCALE_HI: f64 = 1e150;
const RESCALE_LO: f64 = 1e-150;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KineticKind {
    /// `(i/2) ∂ₓ²`
    Diffraction,
    /// `D ∂ₓ²`, `D ≥ 0`
    Diffusion { coefficient: f64 },
    /// No transport: each point amplifies independently.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Grid points on `[0, 1)`; a power of two.
    pub n_x: usize,
    /// Time steps over the run.
    pub n_t: usize,
    pub kinetic: KineticKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_x: 256,
            n_t: 1024,
            kinetic: KineticKind::Diffraction,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_x < 2 || !self.n_x.is_power_of_two() {
            return Err(Error::InvalidSolverConfig(format!(
                "n_x must be a power of two >= 2, got {}",
                self.n_x
            )));
        }
        if self.n_t < 1 {
            return Err(Error::InvalidSolverConfig("n_t must be >= 1".into()));
        }
        if let KineticKind::Diffusion { coefficient } = self.kinetic {
            if !(coefficient >= 0.0 && coefficient.is_finite()) {
                return Err(Error::InvalidSolverConfig(format!(
                    "diffusion coefficient must be finite and >= 0, got {coefficient}"
                )));
            }
        }
        Ok(())
    }

    /// Also requires `n_x ≥ 8N` so the driver bandwidth is resolved.
    pub fn validate_for(&self, w: &SpectralWeights) -> Result<()> {
        self.validate()?;
        if self.n_x < 8 * w.n_max() {
            return Err(Error::InvalidSolverConfig(format!(
                "n_x = {} does not resolve N = {} (need n_x >= {})",
                self.n_x,
                w.n_max(),
                8 * w.n_max()
            )));
        }
        Ok(())
    }
}

/// Solution samples `E(x_j, time)` at `x_j = j / n_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<Complex64>,
    pub time: f64,
    /// The field is `values · exp(log_scale)`.
    pub log_scale: f64,
}

impl GridField {
    pub fn constant(n_x: usize, value: Complex64) -> Self {
        GridField {
            values: vec![value; n_x],
            time: 0.0,
            log_scale: 0.0,
        }
    }

    pub fn n_x(&self) -> usize {
        self.values.len()
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 / self.n_x() as f64
    }

    pub fn value(&self, j: usize) -> Complex64 {
        self.values[j] * self.log_scale.exp()
    }

    pub fn abs_at(&self, j: usize) -> f64 {
        self.values[j].norm() * self.log_scale.exp()
    }

    /// `ln |E(x_j)|`, finite even when `|E|` is outside the `f64` range.
    pub fn ln_abs_at(&self, j: usize) -> f64 {
        self.values[j].norm().ln() + self.log_scale
    }

    /// `(∫₀¹ |E|² dx)^{1/2}` by the grid rule.
    pub fn l2_norm(&self) -> f64 {
        self.ln_l2_norm().exp()
    }

    pub fn ln_l2_norm(&self) -> f64 {
        let mean_sq: f64 =
            self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.n_x() as f64;
        0.5 * mean_sq.ln() + self.log_scale
    }

    fn renormalize(&mut self) {
        let max = self.values.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        if max > 0.0 && !(RESCALE_LO..=RESCALE_HI).contains(&max) {
            let inv = 1.0 / max;
            self.values.iter_mut().for_each(|v| *v *= inv);
            self.log_scale += max.ln();
        }
    }
}

/// Time integral of a real gain over a step, evaluated on the grid.
pub trait GainIntegral: Sync {
    /// Writes `out[j] = ∫_{t0}^{t1} g(x_j, τ) dτ`.
    fn integrate(&self, t0: f64, t1: f64, out: &mut [f64]);
}

/// Exact step integrals of `λ |S(x_j, τ)|²`.
///
/// `|S|²` is a trigonometric polynomial in `τ` with frequencies `f = n² − m²`.
/// The per-point coefficients of each frequency are assembled once, so a step
/// costs one complex multiply-add per positive frequency and grid point.
#[derive(Debug, Clone)]
pub struct StochasticGain {
    lambda: f64,
    n_x: usize,
    /// Coefficient of frequency 0 per grid point (real).
    steady: Vec<f64>,
    /// Distinct positive frequencies.
    freqs: Vec<i64>,
    /// `coeffs[f_idx * n_x + j]`.
    coeffs: Vec<Complex64>,
}

impl StochasticGain {
    /// Gain for coefficient vector `s` (storage order).
    pub fn new(w: &SpectralWeights, s: &[Complex64], lambda: f64, n_x: usize) -> Self {
        let m = w.dim();
        assert_eq!(s.len(), m, "coefficient vector has wrong length");
        let eps = w.slots();
        let amp: Vec<Complex64> = (0..m).map(|i| s[i] * eps[i].sqrt()).collect();

        let mut freqs: Vec<i64> = Vec::new();
        for a in 0..m {
            for b in 0..m {
                let f = mode_number(a).pow(2) - mode_number(b).pow(2);
                if f > 0 && !freqs.contains(&f) {
                    freqs.push(f);
                }
            }
        }
        freqs.sort_unstable();

        let mut steady = vec![0.0; n_x];
        let mut coeffs = vec![Complex64::new(0.0, 0.0); freqs.len() * n_x];
        for a in 0..m {
            for b in 0..m {
                let (n, k) = (mode_number(a), mode_number(b));
                let f = n * n - k * k;
                if f < 0 {
                    continue;
                }
                let pair = amp[a] * amp[b].conj();
                if pair == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let dn = (n - k) as f64;
                if f == 0 {
                    for (j, out) in steady.iter_mut().enumerate() {
                        let x = j as f64 / n_x as f64;
                        *out += (pair * cis_turns(dn * x)).re;
                    }
                } else {
                    let fi = freqs.binary_search(&f).expect("frequency registered");
                    let row = &mut coeffs[fi * n_x..(fi + 1) * n_x];
                    for (j, out) in row.iter_mut().enumerate() {
                        let x = j as f64 / n_x as f64;
                        *out += pair * cis_turns(dn * x);
                    }
                }
            }
        }
        StochasticGain {
            lambda,
            n_x,
            steady,
            freqs,
            coeffs,
        }
    }

    pub fn from_realization(
        w: &SpectralWeights,
        r: &DriverRealization,
        lambda: f64,
        n_x: usize,
    ) -> Self {
        Self::new(w, &r.s, lambda, n_x)
    }
}

impl GainIntegral for StochasticGain {
    fn integrate(&self, t0: f64, t1: f64, out: &mut [f64]) {
        let dt = t1 - t0;
        let mid = 0.5 * (t0 + t1);
        // ∫ e^{2iπfτ} dτ over [t0, t1] = e^{2iπ f mid} sin(π f dt) / (π f)
        let weights: Vec<Complex64> = self
            .freqs
            .iter()
            .map(|&f| {
                let ff = f as f64;
                cis_turns(ff * mid) * ((PI * ff * dt).sin() / (PI * ff))
            })
            .collect();
        for (j, o) in out.iter_mut().enumerate().take(self.n_x) {
            let mut acc = self.steady[j] * dt;
            for (fi, wgt) in weights.iter().enumerate() {
                acc += 2.0 * (self.coeffs[fi * self.n_x + j] * wgt).re;
            }
            *o = self.lambda * acc;
        }
    }
}

/// `−scale·V(x)` for a time-independent potential, sampled once.
#[derive(Debug, Clone)]
pub struct StaticPotentialGain {
    rate: Vec<f64>,
}

impl StaticPotentialGain {
    pub fn new(v: impl Fn(f64) -> f64, scale: f64, n_x: usize) -> Self {
        let rate = (0..n_x)
            .map(|j| -scale * v(j as f64 / n_x as f64))
            .collect();
        StaticPotentialGain { rate }
    }

    pub fn from_samples(rate: Vec<f64>) -> Self {
        StaticPotentialGain { rate }
    }
}

impl GainIntegral for StaticPotentialGain {
    fn integrate(&self, t0: f64, t1: f64, out: &mut [f64]) {
        let dt = t1 - t0;
        out.iter_mut()
            .zip(&self.rate)
            .for_each(|(o, r)| *o = r * dt);
    }
}

/// `−scale·V(x,t)` integrated over each step with Simpson's rule.
pub struct PotentialGain<F> {
    v: F,
    scale: f64,
    n_x: usize,
}

impl<F: Fn(f64, f64) -> f64 + Sync> PotentialGain<F> {
    pub fn new(v: F, scale: f64, n_x: usize) -> Self {
        PotentialGain { v, scale, n_x }
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> GainIntegral for PotentialGain<F> {
    fn integrate(&self, t0: f64, t1: f64, out: &mut [f64]) {
        let dt = t1 - t0;
        let tm = 0.5 * (t0 + t1);
        for (j, o) in out.iter_mut().enumerate() {
            let x = j as f64 / self.n_x as f64;
            let v = (self.v)(x, t0) + 4.0 * (self.v)(x, tm) + (self.v)(x, t1);
            *o = -self.scale * v * dt / 6.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub time: f64,
    pub l2_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: GridField,
    /// Initial state followed by the requested uniform checkpoints.
    pub checkpoints: Vec<Checkpoint>,
}

/// Reusable solver state: FFT plans and kinetic multipliers for one config.
pub struct Propagator {
    cfg: SolverConfig,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    gain: Vec<f64>,
}

impl Propagator {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(cfg.n_x);
        let ifft = planner.plan_fft_inverse(cfg.n_x);
        let scratch_len = fft
            .get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len());
        Ok(Propagator {
            cfg: *cfg,
            fft,
            ifft,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            gain: vec![0.0; cfg.n_x],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Fourier multipliers for a kinetic substep of length `dt`, including
    /// the `1/n_x` normalization of the inverse transform.
    fn kinetic_factors(&self, dt: f64) -> Option<Vec<Complex64>> {
        let n = self.cfg.n_x;
        let norm = 1.0 / n as f64;
        let wavenumber = |i: usize| {
            let q = if i <= n / 2 {
                i as f64
            } else {
                i as f64 - n as f64
            };
            TAU * q
        };
        match self.cfg.kinetic {
            KineticKind::None => None,
            KineticKind::Diffraction => Some(
                (0..n)
                    .map(|i| {
                        let k = wavenumber(i);
                        Complex64::from_polar(norm, -0.5 * k * k * dt)
                    })
                    .collect(),
            ),
            KineticKind::Diffusion { coefficient } => Some(
                (0..n)
                    .map(|i| {
                        let k = wavenumber(i);
                        Complex64::new(norm * (-coefficient * k * k * dt).exp(), 0.0)
                    })
                    .collect(),
            ),
        }
    }

    fn apply_kinetic(&mut self, field: &mut GridField, factors: &Option<Vec<Complex64>>) {
        if let Some(f) = factors {
            self.fft
                .process_with_scratch(&mut field.values, &mut self.scratch);
            field.values.iter_mut().zip(f).for_each(|(v, m)| *v *= m);
            self.ifft
                .process_with_scratch(&mut field.values, &mut self.scratch);
        }
    }

    /// Evolves `E(x,0) = 1` to `horizon`, recording the L² norm at
    /// `n_checkpoints` uniform times.
    pub fn evolve<G: GainIntegral + ?Sized>(
        &mut self,
        gain: &G,
        horizon: f64,
        n_checkpoints: usize,
    ) -> Evolution {
        let n_t = self.cfg.n_t;
        let dt = horizon / n_t as f64;
        let half = self.kinetic_factors(0.5 * dt);
        let full = self.kinetic_factors(dt);

        let mut marks: Vec<usize> = (1..=n_checkpoints)
            .map(|i| i * n_t / n_checkpoints)
            .collect();
        marks.retain(|&s| s > 0);
        marks.dedup();

        let mut field = GridField::constant(self.cfg.n_x, Complex64::new(1.0, 0.0));
        let mut checkpoints = vec![Checkpoint {
            time: 0.0,
            l2_norm: field.l2_norm(),
        }];
        let mut gain_buf = std::mem::take(&mut self.gain);
        let mut next_mark = 0;

        self.apply_kinetic(&mut field, &half);
        for step in 0..n_t {
            let (t0, t1) = (step as f64 * dt, (step + 1) as f64 * dt);
            gain.integrate(t0, t1, &mut gain_buf);
            field
                .values
                .iter_mut()
                .zip(&gain_buf)
                .for_each(|(v, g)| *v *= g.exp());
            field.renormalize();

            let done = step + 1;
            let at_mark = next_mark < marks.len() && marks[next_mark] == done;
            if done == n_t || at_mark {
                self.apply_kinetic(&mut field, &half);
                if at_mark {
                    checkpoints.push(Checkpoint {
                        time: t1,
                        l2_norm: field.l2_norm(),
                    });
                    next_mark += 1;
                }
                if done < n_t {
                    self.apply_kinetic(&mut field, &half);
                }
            } else {
                self.apply_kinetic(&mut field, &full);
            }
        }
        field.time = horizon;
        self.gain = gain_buf;
        Evolution { field, checkpoints }
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

/// Solves the stochastic equation for one realization up to `t = 1`.
pub fn evolve_stochastic(
    w: &SpectralWeights,
    r: &DriverRealization,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<GridField> {
    evolve_stochastic_with_checkpoints(w, r, lambda, cfg, 0).map(|e| e.field)
}

pub fn evolve_stochastic_with_checkpoints(
    w: &SpectralWeights,
    r: &DriverRealization,
    lambda: f64,
    cfg: &SolverConfig,
    n_checkpoints: usize,
) -> Result<Evolution> {
    check_lambda(lambda)?;
    cfg.validate_for(w)?;
    let mut prop = Propagator::new(cfg)?;
    let gain = StochasticGain::from_realization(w, r, lambda, cfg.n_x);
    Ok(prop.evolve(&gain, 1.0, n_checkpoints))
}

/// Solves `∂ₜE = K∂ₓ²E − scale·V(x,t)·E` up to `horizon`.
///
/// With diffraction this is the path integral of
/// `exp(∫[(i/2)ẋ² − scale·V(x(τ),τ)]dτ)` over paths ending at each grid point.
pub fn evolve_potential<F>(v: F, scale: f64, horizon: f64, cfg: &SolverConfig) -> Result<GridField>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    check_horizon(horizon)?;
    let mut prop = Propagator::new(cfg)?;
    let gain = PotentialGain::new(v, scale, cfg.n_x);
    Ok(prop.evolve(&gain, horizon, 0).field)
}

/// [`evolve_potential`] for a time-independent potential.
pub fn evolve_static_potential<F>(
    v: F,
    scale: f64,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<GridField>
where
    F: Fn(f64) -> f64,
{
    check_horizon(horizon)?;
    let mut prop = Propagator::new(cfg)?;
    let gain = StaticPotentialGain::new(v, scale, cfg.n_x);
    Ok(prop.evolve(&gain, horizon, 0).field)
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param(
            "horizon",
            format!("must be finite and > 0, got {horizon}"),
        ));
    }
    Ok(())
}

fn check_ensemble(n_samples: usize) -> Result<()> {
    if n_samples < 100 {
        return Err(Error::param(
            "n_samples",
            format!("need >= 100, got {n_samples}"),
        ));
    }
    Ok(())
}

/// `|E(0,1)|` for each ensemble member, with the coefficient vector mapped
/// through `transform` before solving.
fn abs_e_samples(
    w: &SpectralWeights,
    lambda: f64,
    cfg: &SolverConfig,
    n_samples: usize,
    seed: u64,
    transform: Option<&DMatrix<Complex64>>,
) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    cfg.validate_for(w)?;
    check_ensemble(n_samples)?;
    if lambda == 0.0 {
        // E ≡ 1 exactly
        return Ok(vec![1.0; n_samples]);
    }
    let samples = (0..n_samples as u64)
        .into_par_iter()
        .map_init(
            || Propagator::new(cfg).expect("validated config"),
            |prop, i| {
                let r = ensemble_member(w, seed, i);
                let s = match transform {
                    Some(p) => (p * nalgebra::DVector::from_vec(r.s))
                        .iter()
                        .cloned()
                        .collect(),
                    None => r.s,
                };
                let gain = StochasticGain::new(w, &s, lambda, cfg.n_x);
                prop.evolve(&gain, 1.0, 0).field.abs_at(0)
            },
        )
        .collect();
    Ok(samples)
}

/// Monte Carlo estimate of `⟨|E(0,1)|⟩`.
///
/// Sampling cannot certify divergence; estimates above `0.9 λ̄_c` are always
/// flagged.
pub fn mean_abs_e(
    w: &SpectralWeights,
    lambda: f64,
    cfg: &SolverConfig,
    n_samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    let lbc = eigen_closed_form(w)?.lambda_bar_c;
    let samples = abs_e_samples(w, lambda, cfg, n_samples, seed, None)?;
    Ok(MomentEstimate::from_samples(
        &samples,
        lambda > NEAR_BOUNDARY * lbc,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// Estimate with coupling `γ` and coefficients `s`.
    pub direct: MomentEstimate,
    /// Estimate with coupling `P†γP` and coefficients `σ` drawn from the same
    /// seeds as `s`.
    pub rotated: MomentEstimate,
}

impl InvarianceReport {
    pub fn overlaps(&self, k: f64) -> bool {
        self.direct.overlaps(&self.rotated, k)
    }
}

/// Compares `⟨|E(0,1)|⟩` under the coupling `γ` and under `P†γP` for the
/// closed-form diagonalizer `P`.
pub fn lemma1_invariance_check(
    w: &SpectralWeights,
    lambda: f64,
    cfg: &SolverConfig,
    n_samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let p = eigen_closed_form(w)?.p;
    lemma1_invariance_check_with(w, lambda, cfg, n_samples, seed, &p)
}

/// [`lemma1_invariance_check`] for an arbitrary unitary `p`.
///
/// Since `σ†P†γPσ = (Pσ)†γ(Pσ)`, the rotated run drives the solver with the
/// coefficient vector `Pσ`.
pub fn lemma1_invariance_check_with(
    w: &SpectralWeights,
    lambda: f64,
    cfg: &SolverConfig,
    n_samples: usize,
    seed: u64,
    p: &DMatrix<Complex64>,
) -> Result<InvarianceReport> {
    let m = w.dim();
    if p.nrows() != m || p.ncols() != m {
        return Err(Error::param("p", format!("must be {m}x{m}")));
    }
    let off = (p.adjoint() * p - DMatrix::<Complex64>::identity(m, m))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if off > 1e-12 {
        return Err(Error::param(
            "p",
            format!("not unitary (|P†P − I| = {off:e})"),
        ));
    }
    let lbc = eigen_closed_form(w)?.lambda_bar_c;
    let near = lambda > NEAR_BOUNDARY * lbc;
    let direct = abs_e_samples(w, lambda, cfg, n_samples, seed, None)?;
    let rotated = abs_e_samples(w, lambda, cfg, n_samples, seed, Some(p))?;
    Ok(InvarianceReport {
        direct: MomentEstimate::from_samples(&direct, near),
        rotated: MomentEstimate::from_samples(&rotated, near),
    })
}
