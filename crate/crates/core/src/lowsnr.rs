//! Low-SNR behaviour: derivatives at zero SNR, minimum energy per bit and
//! wideband slope.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::config::{linear_to_db, SystemConfig};
use crate::effcap::{SpectralEnsemble, TransitionModel};
use crate::error::{Error, Result};
use crate::stats::mean;

/// Why the second-order quantities are missing from a report.
pub const REASON_NOT_MEMORYLESS: &str = "requires_a_plus_b_eq_1";

/// Ensemble moments of the maximal eigenvalues that drive every low-SNR formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenMoments {
    /// `E[ℓ₁λ₁ + ℓ₂λ₂]`
    pub first: f64,
    /// `E[ℓ₁λ₁² + ℓ₂λ₂²]`
    pub second: f64,
    /// `E[ℓ₁λ₁²/m₁ + ℓ₂λ₂²/m₂]`
    pub second_by_mult: f64,
    pub max_m1: usize,
    pub max_m2: usize,
}

pub fn eigen_moments(ens: &SpectralEnsemble, tm: &TransitionModel) -> Result<EigenMoments> {
    if ens.is_empty() {
        return Err(Error::invalid("samples", "ensemble is empty"));
    }
    let (l1, l2) = (tm.ell1(), tm.ell2());
    let n = ens.len();
    let (mut f, mut s, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut max_m1, mut max_m2) = (0, 0);
    for sp in ens.spectra() {
        let (a, b) = (sp.lambda_max_busy(), sp.lambda_max_idle());
        let (m1, m2) = sp.multiplicities();
        max_m1 = max_m1.max(m1);
        max_m2 = max_m2.max(m2);
        f.push(l1 * a + l2 * b);
        s.push(l1 * a * a + l2 * b * b);
        w.push(l1 * a * a / m1 as f64 + l2 * b * b / m2 as f64);
    }
    Ok(EigenMoments {
        first: mean(&f),
        second: mean(&s),
        second_by_mult: mean(&w),
        max_m1,
        max_m2,
    })
}

/// `Ċ_E(0, θ) = (ℓ₁E[λ_max(H†K_z⁻¹H)] + ℓ₂E[λ_max(H†H)])/ln 2`, with `μ = 1`.
pub fn first_derivative(ens: &SpectralEnsemble, tm: &TransitionModel) -> Result<f64> {
    Ok(eigen_moments(ens, tm)?.first / LN_2)
}

/// Minimum energy per bit `1/Ċ_E(0, θ)` as `(linear, dB)`.
pub fn min_energy_per_bit(ens: &SpectralEnsemble, tm: &TransitionModel) -> Result<(f64, f64)> {
    let c_dot = first_derivative(ens, tm)?;
    if c_dot.is_nan() || c_dot <= 0.0 {
        return Err(Error::Degenerate("first derivative is zero (all-zero channel?)".into()));
    }
    let lin = 1.0 / c_dot;
    Ok((lin, linear_to_db(lin)))
}

fn require_memoryless(tm: &TransitionModel) -> Result<()> {
    if tm.is_memoryless() {
        Ok(())
    } else {
        Err(Error::UnsupportedRegime(
            "second derivative is only available for a + b = 1".into(),
        ))
    }
}

fn c_ddot_from(m: &EigenMoments, config: &SystemConfig) -> f64 {
    let n = config.rx_antennas() as f64;
    let q = config.theta() * config.frame_bandwidth() * n / (LN_2 * LN_2);
    q * m.first * m.first - q * m.second - n / LN_2 * m.second_by_mult
}

/// `C̈_E(0, θ)` for memoryless PU activity (`a + b = 1`).
pub fn second_derivative_sym(ens: &SpectralEnsemble, tm: &TransitionModel, config: &SystemConfig) -> Result<f64> {
    require_memoryless(tm)?;
    Ok(c_ddot_from(&eigen_moments(ens, tm)?, config))
}

/// `S₀ = 2Ċ²/(−C̈)·ln 2`.
pub fn wideband_slope(ens: &SpectralEnsemble, tm: &TransitionModel, config: &SystemConfig) -> Result<f64> {
    let c_dot = first_derivative(ens, tm)?;
    let c_ddot = second_derivative_sym(ens, tm, config)?;
    slope_from_derivatives(c_dot, c_ddot)
}

pub fn slope_from_derivatives(c_dot: f64, c_ddot: f64) -> Result<f64> {
    if c_ddot.is_nan() || c_ddot >= 0.0 {
        return Err(Error::Degenerate(format!("second derivative must be negative, got {c_ddot}")));
    }
    Ok(2.0 * c_dot * c_dot / (-c_ddot) * LN_2)
}

/// The explicit slope `2E²·ln2 / (θTBN(E[·²] − E²) + N·E[·²/m]·ln 2)`.
pub fn wideband_slope_explicit(ens: &SpectralEnsemble, tm: &TransitionModel, config: &SystemConfig) -> Result<f64> {
    require_memoryless(tm)?;
    let m = eigen_moments(ens, tm)?;
    let n = config.rx_antennas() as f64;
    let e2 = m.first * m.first;
    let den = config.theta() * config.frame_bandwidth() * n * (m.second - e2) + n * m.second_by_mult * LN_2;
    if den.is_nan() || den <= 0.0 {
        return Err(Error::Degenerate("wideband slope denominator vanishes".into()));
    }
    Ok(2.0 * e2 * LN_2 / den)
}

/// Moments `E[tr(H†H)]`, `E[tr²(H†H)]` and `E[tr((H†H)²)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceMoments {
    pub tr: f64,
    pub tr_sq: f64,
    pub tr_of_sq: f64,
}

impl TraceMoments {
    /// Exact values for i.i.d. unit-variance complex Gaussian entries.
    pub fn gaussian(tx: usize, rx: usize) -> Self {
        let (m, n) = (tx as f64, rx as f64);
        Self {
            tr: n * m,
            tr_sq: n * m * (n * m + 1.0),
            tr_of_sq: n * m * (n + m),
        }
    }

    /// Sample estimates from an ensemble's `H†H` eigenvalues.
    pub fn from_ensemble(ens: &SpectralEnsemble) -> Self {
        let (tr, sq, of_sq) = per_sample_traces(ens);
        Self {
            tr: mean(&tr),
            tr_sq: mean(&sq),
            tr_of_sq: mean(&of_sq),
        }
    }
}

/// Per-sample `(tr(H†H), tr²(H†H), tr((H†H)²))`.
pub fn per_sample_traces(ens: &SpectralEnsemble) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut tr = Vec::with_capacity(ens.len());
    let mut sq = Vec::with_capacity(ens.len());
    let mut of_sq = Vec::with_capacity(ens.len());
    for sp in ens.spectra() {
        let t: f64 = sp.idle.iter().sum();
        tr.push(t);
        sq.push(t * t);
        of_sq.push(sp.idle.iter().map(|l| l * l).sum());
    }
    (tr, sq, of_sq)
}

/// Equal-power closed forms with white interference of variance `σ_s²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformClosedForms {
    pub ebn0_min: f64,
    pub ebn0_min_db: f64,
    /// Present only when `a + b = 1`.
    pub s0: Option<f64>,
}

/// Closed forms evaluated from the Gaussian trace moments.
pub fn uniform_closed_forms(config: &SystemConfig, tm: &TransitionModel, sigma_s2: f64) -> Result<UniformClosedForms> {
    let moments = TraceMoments::gaussian(config.tx_antennas(), config.rx_antennas());
    uniform_closed_forms_from_moments(config, tm, sigma_s2, &moments)
}

/// Closed forms with caller-supplied trace moments.
pub fn uniform_closed_forms_from_moments(
    config: &SystemConfig,
    tm: &TransitionModel,
    sigma_s2: f64,
    moments: &TraceMoments,
) -> Result<UniformClosedForms> {
    if !(sigma_s2 > 0.0 && sigma_s2.is_finite()) {
        return Err(Error::invalid("sigma_s2", format!("must be positive, got {sigma_s2}")));
    }
    let (l1, l2) = (tm.ell1(), tm.ell2());
    let lin = l1 / sigma_s2 + l2;
    let quad = l1 / (sigma_s2 * sigma_s2) + l2;
    let ebn0 = LN_2 / (lin * moments.tr);
    let s0 = if tm.is_memoryless() {
        let n = config.rx_antennas() as f64;
        let num = 2.0 * lin * lin * moments.tr * moments.tr;
        let den = config.theta() * config.frame_bandwidth() * n * (quad * moments.tr_sq - lin * lin * moments.tr * moments.tr)
            + n * quad * moments.tr_of_sq * LN_2;
        Some(num / den)
    } else {
        None
    };
    Ok(UniformClosedForms {
        ebn0_min: ebn0,
        ebn0_min_db: linear_to_db(ebn0),
        s0,
    })
}

/// Summary of the low-SNR analysis for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowSnrReport {
    pub c_dot: f64,
    pub c_ddot: Option<f64>,
    pub ebn0_min: f64,
    pub ebn0_min_db: f64,
    pub s0: Option<f64>,
    pub ell1: f64,
    pub ell2: f64,
    /// Largest top-eigenvalue multiplicity seen for `H†K_z⁻¹H`.
    pub m1: usize,
    /// Largest top-eigenvalue multiplicity seen for `H†H`.
    pub m2: usize,
    /// Set when `c_ddot` and `s0` are unavailable.
    pub reason: Option<&'static str>,
}

pub fn low_snr_report(ens: &SpectralEnsemble, tm: &TransitionModel, config: &SystemConfig) -> Result<LowSnrReport> {
    let m = eigen_moments(ens, tm)?;
    let c_dot = m.first / LN_2;
    if c_dot.is_nan() || c_dot <= 0.0 {
        return Err(Error::Degenerate("first derivative is zero (all-zero channel?)".into()));
    }
    let (c_ddot, s0, reason) = if tm.is_memoryless() {
        let c_ddot = c_ddot_from(&m, config);
        (Some(c_ddot), slope_from_derivatives(c_dot, c_ddot).ok(), None)
    } else {
        (None, None, Some(REASON_NOT_MEMORYLESS))
    };
    Ok(LowSnrReport {
        c_dot,
        c_ddot,
        ebn0_min: 1.0 / c_dot,
        ebn0_min_db: linear_to_db(1.0 / c_dot),
        s0,
        ell1: tm.ell1(),
        ell2: tm.ell2(),
        m1: m.max_m1,
        m2: m.max_m2,
        reason,
    })
}

/// Second-order expansion `Ċ·snr + C̈·snr²/2` (first order only without `C̈`).
pub fn lowsnr_expansion(report: &LowSnrReport, snr: f64) -> Result<f64> {
    if !(snr >= 0.0 && snr.is_finite()) {
        return Err(Error::invalid("snr", format!("must be non-negative, got {snr}")));
    }
    Ok(report.c_dot * snr + report.c_ddot.unwrap_or(0.0) * snr * snr / 2.0)
}
