//! The rank-one coupling matrix `γ(x,t)` with `s†γ(x,t)s = |S(x,t)|²`, its
//! time integral at `x = 0`, and the closed-form eigensystem of that integral.
//!
//! In the `0, 1, -1, 2, -2, …` storage order the time integral is already
//! block diagonal: a `1×1` block `ε_0` followed by `2×2` blocks
//!
//! ```text
//! g_j = [ ε_j          √(ε_j ε_{-j}) ]
//!       [ √(ε_j ε_{-j})  ε_{-j}       ]
//! ```
//!
//! with eigenvalues `ε_j + ε_{-j}` and `0`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::driver_field::{cis_turns, mode_number, mode_slot, mode_turns, SpectralWeights};
use crate::error::{Error, Result};

/// Relative tolerance used when comparing eigenvalues for ties.
const TIE_TOL: f64 = 1e-14;

/// Dense Hermitian matrix over the mode slots.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

impl HermitianMatrix {
    /// Wraps `m`, checking Hermiticity to `1e-12`.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Invariant("matrix is not square".into()));
        }
        let dev = hermitian_deviation(&m);
        if dev > 1e-12 {
            return Err(Error::Invariant(format!(
                "matrix is not Hermitian (max |a_ij - conj a_ji| = {dev:e})"
            )));
        }
        Ok(HermitianMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    /// `v† A v` (real for Hermitian `A`).
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        let n = self.dim();
        assert_eq!(v.len(), n);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, vi) in v.iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (j, vj) in v.iter().enumerate() {
                row += self.0[(i, j)] * vj;
            }
            acc += vi.conj() * row;
        }
        acc.re
    }

    /// `Q† A Q`.
    pub fn congruence(&self, q: &DMatrix<Complex64>) -> HermitianMatrix {
        HermitianMatrix(q.adjoint() * &self.0 * q)
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }
}

fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `a_n = √ε_n exp(-2iπ(n x + n² t))`, so that `γ(x,t) = a a†`.
pub fn gamma_vector(w: &SpectralWeights, x: f64, t: f64) -> Vec<Complex64> {
    w.slots()
        .iter()
        .enumerate()
        .map(|(slot, e)| cis_turns(-mode_turns(mode_number(slot), x, t)) * e.sqrt())
        .collect()
}

/// `γ_{nm}(x,t) = √(ε_n ε_m) exp(-2iπ[(n-m)x + (n²-m²)t])`.
pub fn gamma_at(w: &SpectralWeights, x: f64, t: f64) -> HermitianMatrix {
    let a = gamma_vector(w, x, t);
    let m = w.dim();
    HermitianMatrix(DMatrix::from_fn(m, m, |i, j| a[i] * a[j].conj()))
}

/// `∫₀¹ γ(0,t) dt`: entry `(n,m)` is `√(ε_n ε_m)` when `n² = m²`, else 0.
pub fn integrated_gamma(w: &SpectralWeights) -> HermitianMatrix {
    let m = w.dim();
    let eps = w.slots();
    HermitianMatrix(DMatrix::from_fn(m, m, |i, j| {
        let (n, k) = (mode_number(i), mode_number(j));
        if n * n == k * k {
            Complex64::new((eps[i] * eps[j]).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Eigen-decomposition of [`integrated_gamma`] and the top-mode data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecomposition {
    /// Eigenvalues `κ` in storage order: `ε_0, ε_1+ε_{-1}, 0, ε_2+ε_{-2}, 0, …`.
    pub kappas: Vec<f64>,
    /// Unitary (real orthogonal) diagonalizer; column `i` is the eigenvector of `kappas[i]`.
    pub p: DMatrix<Complex64>,
    /// `1 / max κ`.
    pub lambda_bar_c: f64,
    /// Slot of the selected top eigenvalue.
    pub m_index: usize,
    /// Pair index of the top mode; 0 when the top mode is the `ε_0` block.
    pub k: usize,
    /// `4 ε_k ε_{-k}` for a pair block, 0 for the `ε_0` block.
    pub alpha_m: f64,
}

impl ModeDecomposition {
    pub fn kappa_max(&self) -> f64 {
        self.kappas[self.m_index]
    }

    /// Column `m_index` of `P`.
    pub fn top_direction(&self) -> Vec<Complex64> {
        self.p.column(self.m_index).iter().cloned().collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub n_max: usize,
    pub modes: Vec<i64>,
    pub kappas: Vec<f64>,
    pub lambda_bar_c: f64,
    pub m_index: usize,
    pub k: usize,
    pub alpha_m: f64,
}

impl From<&ModeDecomposition> for SpectrumSummary {
    fn from(d: &ModeDecomposition) -> Self {
        let modes = (0..d.kappas.len()).map(mode_number).collect();
        SpectrumSummary {
            n_max: d.kappas.len() / 2,
            modes,
            kappas: d.kappas.clone(),
            lambda_bar_c: d.lambda_bar_c,
            m_index: d.m_index,
            k: d.k,
            alpha_m: d.alpha_m,
        }
    }
}

/// Closed-form eigensystem of `∫₀¹ γ(0,t) dt`.
///
/// The top mode is the largest `κ`; among ties a pair block with the
/// smallest `k` wins over the `ε_0` block. A block with
/// `ε_j = ε_{-j} = 0` keeps the identity as its diagonalizer.
pub fn eigen_closed_form(w: &SpectralWeights) -> Result<ModeDecomposition> {
    let m = w.dim();
    let mut kappas = vec![0.0; m];
    let mut p = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    kappas[0] = w.eps(0);
    p[(0, 0)] = Complex64::new(1.0, 0.0);
    for j in 1..=w.n_max() as i64 {
        let (a, b) = (mode_slot(j), mode_slot(-j));
        let (ep, em) = (w.eps(j), w.eps(-j));
        let sum = ep + em;
        kappas[a] = sum;
        kappas[b] = 0.0;
        let (c, s) = if sum > 0.0 {
            ((ep / sum).sqrt(), (em / sum).sqrt())
        } else {
            (1.0, 0.0)
        };
        // p_j = [[c, s], [s, -c]]; identity in the degenerate block
        let block = if sum > 0.0 {
            [[c, s], [s, -c]]
        } else {
            [[1.0, 0.0], [0.0, 1.0]]
        };
        for (r, row) in [a, b].into_iter().zip(block) {
            for (col, v) in [a, b].into_iter().zip(row) {
                p[(r, col)] = Complex64::new(v, 0.0);
            }
        }
    }

    let kmax = kappas.iter().cloned().fold(0.0_f64, f64::max);
    if kmax <= 0.0 {
        return Err(Error::InvalidWeights("all weights vanish".into()));
    }
    let tied = |v: f64| (kmax - v).abs() <= TIE_TOL * kmax;
    let tied_pairs = || (1..=w.n_max() as i64).filter(|&j| tied(kappas[mode_slot(j)]));
    let (m_index, k) = if let Some(j) = tied_pairs().find(|&j| w.eps(j) * w.eps(-j) > 0.0) {
        (mode_slot(j), j as usize)
    } else if tied(kappas[0]) {
        (0, 0)
    } else {
        // a one-sided block (ε_{-j} = 0 or ε_j = 0) is the unique top
        let j = tied_pairs().next().expect("maximum is attained");
        (mode_slot(j), j as usize)
    };
    let alpha_m = if k == 0 {
        0.0
    } else {
        4.0 * w.eps(k as i64) * w.eps(-(k as i64))
    };
    Ok(ModeDecomposition {
        lambda_bar_c: 1.0 / kappas[m_index],
        kappas,
        p,
        m_index,
        k,
        alpha_m,
    })
}

/// `λ̄_c = 1 / max κ`, always `>= 1`.
pub fn lambda_bar_c(w: &SpectralWeights) -> Result<f64> {
    eigen_closed_form(w).map(|d| d.lambda_bar_c)
}

/// `σ† P† γ(x,t) P σ` for `σ = z·e_m`, computed with the full matrices.
pub fn quadratic_form_direction(
    w: &SpectralWeights,
    x: f64,
    t: f64,
    z: Complex64,
    dec: &ModeDecomposition,
) -> f64 {
    let rotated = gamma_at(w, x, t).congruence(&dec.p);
    let mut sigma = vec![Complex64::new(0.0, 0.0); w.dim()];
    sigma[dec.m_index] = z;
    rotated.quadratic_form(&sigma)
}

/// `[1/λ̄_c − α_m λ̄_c sin²(2πkx)] |z|²`.
pub fn quadratic_form_closed_form(dec: &ModeDecomposition, x: f64, z_abs: f64) -> f64 {
    let s = (std::f64::consts::TAU * ((dec.k as f64 * x).rem_euclid(1.0))).sin();
    (1.0 / dec.lambda_bar_c - dec.alpha_m * dec.lambda_bar_c * s * s) * z_abs * z_abs
}
