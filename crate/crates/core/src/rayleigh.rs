//! Closed-form effective rate for i.i.d. Rayleigh fading with equal power
//! allocation, through the Hankel-determinant MGF of the mutual information.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use crate::config::{snr_of, PowerPolicy, SystemConfig};
use crate::effcap::{Normalization, TransitionModel};
use crate::error::{Error, Result};
use crate::quadrature::laguerre_rule;

const ORDERS: [usize; 6] = [16, 32, 64, 128, 256, 512];
const AGREEMENT: f64 = 1e-10;

/// `Γ(n)` for a positive integer `n ≤ 171`.
pub fn gamma_int(n: usize) -> f64 {
    assert!((1..=171).contains(&n), "gamma_int argument out of range: {n}");
    (1..n).fold(1.0, |acc, k| acc * k as f64)
}

/// Parameters of the Hankel matrix `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelSpec {
    /// `min(M, N)`
    pub k: usize,
    /// `max(M, N) − min(M, N)`
    pub d: usize,
    /// `θTB·log₂e`
    pub exponent: f64,
    pub snr_arg: f64,
    /// `N/M`
    pub ratio: f64,
}

impl HankelSpec {
    pub fn new(tx: usize, rx: usize, exponent: f64, snr_arg: f64) -> Result<Self> {
        if tx == 0 || rx == 0 {
            return Err(Error::invalid("M", "antenna counts must be at least 1"));
        }
        if !(exponent >= 0.0 && exponent.is_finite()) {
            return Err(Error::invalid("exponent", format!("must be non-negative, got {exponent}")));
        }
        if !(snr_arg >= 0.0 && snr_arg.is_finite()) {
            return Err(Error::invalid("snr_arg", format!("must be non-negative, got {snr_arg}")));
        }
        let k = tx.min(rx);
        let d = tx.max(rx) - k;
        if 2 * k + d > 171 {
            return Err(Error::invalid("M", "antenna counts too large for exact Gamma factors"));
        }
        Ok(Self {
            k,
            d,
            exponent,
            snr_arg,
            ratio: rx as f64 / tx as f64,
        })
    }

    fn rho(&self) -> f64 {
        self.ratio * self.snr_arg
    }
}

/// `∫₀^∞ (1+ρz)^{−s} z^p e^{−z} dz` at a fixed rule order.
///
/// The integral is taken in `u = s·ln(1+ρz) + z`, which turns the whole
/// damping factor into the Laguerre weight `e^{−u}`.
fn mapped_integral(p: usize, s: f64, rho: f64, order: usize) -> f64 {
    let rule = laguerre_rule(order);
    let sr = s * rho;
    rule.integrate(|u| {
        let z = invert_map(u, s, rho);
        z.powi(p as i32) / (sr / (1.0 + rho * z) + 1.0)
    })
}

/// Solves `s·ln(1+ρz) + z = u` for `z ≥ 0`.
fn invert_map(u: f64, s: f64, rho: f64) -> f64 {
    let sr = s * rho;
    // the map is concave, so Newton from below increases monotonically
    let mut z = u / (1.0 + sr);
    for _ in 0..100 {
        let f = s * (rho * z).ln_1p() + z - u;
        let step = f / (sr / (1.0 + rho * z) + 1.0);
        z -= step;
        if step.abs() <= 1e-15 * z.max(1e-300) {
            break;
        }
    }
    z
}

fn integral(p: usize, s: f64, rho: f64) -> Result<f64> {
    if s == 0.0 || rho == 0.0 {
        return Ok(gamma_int(p + 1));
    }
    let mut prev = mapped_integral(p, s, rho, ORDERS[0]);
    let mut change = f64::INFINITY;
    for &order in &ORDERS[1..] {
        let cur = mapped_integral(p, s, rho, order);
        change = ((cur - prev) / cur).abs();
        if change <= AGREEMENT {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConvergence {
        order: *ORDERS.last().unwrap(),
        relative_change: change,
    })
}

/// Entry `g_{m,n} = ∫₀^∞ (1 + (N/M)·snr·z)^{−s} z^{m+n+d−2} e^{−z} dz`, 1-based indices.
pub fn hankel_entry(spec: &HankelSpec, m: usize, n: usize) -> Result<f64> {
    if m == 0 || n == 0 || m > spec.k || n > spec.k {
        return Err(Error::invalid("index", format!("({m}, {n}) outside 1..={}", spec.k)));
    }
    integral(m + n + spec.d - 2, spec.exponent, spec.rho())
}

/// The full `k×k` matrix `G`.
pub fn hankel_matrix(spec: &HankelSpec) -> Result<DMatrix<f64>> {
    // Hankel: g depends on m+n only
    let diag: Vec<f64> = (2..=2 * spec.k)
        .map(|s| integral(s + spec.d - 2, spec.exponent, spec.rho()))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(spec.k, spec.k, |i, j| diag[i + j]))
}

/// `det G / ∏ᵢ Γ(d+i)Γ(i)`, i.e. `E[det(I + (N/M)·snr·HH†)^{−s}]`.
pub fn mgf_determinant(spec: &HankelSpec) -> Result<f64> {
    if spec.exponent == 0.0 || spec.snr_arg == 0.0 {
        return Ok(1.0);
    }
    let g = hankel_matrix(spec)?;
    let k = spec.k;
    // symmetric scaling by the diagonal Gamma values keeps entries O(1)
    let scale: Vec<f64> = (1..=k).map(|m| gamma_int(2 * m + spec.d - 1).sqrt()).collect();
    let scaled = DMatrix::from_fn(k, k, |i, j| g[(i, j)] / (scale[i] * scale[j]));
    let mut log_ratio = scaled.lu().determinant().ln();
    for (i, s) in scale.iter().enumerate() {
        let i = i + 1;
        log_ratio += 2.0 * s.ln() - gamma_int(spec.d + i).ln() - gamma_int(i).ln();
    }
    Ok(log_ratio.exp())
}

/// Closed-form effective rate for `a + b = 1` and uniform input covariance.
pub fn closed_form_effective_rate(
    config: &SystemConfig,
    tm: &TransitionModel,
    policy: &PowerPolicy,
    norm: Normalization,
) -> Result<f64> {
    if !tm.is_memoryless() {
        return Err(Error::UnsupportedRegime("closed form requires a + b = 1".into()));
    }
    if config.theta() <= 0.0 {
        return Err(Error::invalid("theta", "closed form needs theta > 0"));
    }
    let snr = snr_of(policy.p2(), config);
    let exponent = config.theta() * config.frame_bandwidth() / LN_2;
    let (tx, rx) = (config.tx_antennas(), config.rx_antennas());
    let busy_arg = policy.mu() * config.noise_var() * snr / (config.interference_var() + config.noise_var());
    let busy = mgf_determinant(&HankelSpec::new(tx, rx, exponent, busy_arg)?)?;
    let idle = mgf_determinant(&HankelSpec::new(tx, rx, exponent, snr)?)?;
    let inner = tm.ell1() * busy + tm.ell2() * idle + tm.ell_off();
    let scale = config.theta() * config.frame_bandwidth() * norm.divisor(config);
    Ok((-inner.ln() / scale).max(0.0))
}
