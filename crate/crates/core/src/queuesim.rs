//! Frame-level queue simulation and tail-decay estimation.

use std::f64::consts::LN_2;

use nalgebra::Cholesky;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{hermitian_eigenvalues, rayleigh_matrix, sample_rng, CMatrix, NoiseCovariance};
use crate::config::{ActivityModel, PowerPolicy, SensingModel, SystemConfig};
use crate::error::{Error, Result};
use crate::rates::{rate_weights, spectral_rate_nats, CovarianceMode};
use crate::stats::linear_fit;

/// Fraction of frames dropped before tail estimation.
pub const DEFAULT_WARMUP: f64 = 0.1;
/// Number of auto-selected thresholds.
pub const AUTO_THRESHOLDS: usize = 8;
const TAIL_HIGH: f64 = 1e-1;
const TAIL_LOW: f64 = 1e-3;
const MIN_R_SQUARED: f64 = 0.95;
const MIN_TAIL_COUNT: usize = 50;

/// Scenario of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameState {
    BusyDetectedBusy = 1,
    BusyDetectedIdle = 2,
    IdleDetectedBusy = 3,
    IdleDetectedIdle = 4,
}

impl FrameState {
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn sensed_busy(self) -> bool {
        matches!(self, FrameState::BusyDetectedBusy | FrameState::IdleDetectedBusy)
    }
}

/// Per-frame service (bits) and scenario sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceTrace {
    pub service: Vec<f64>,
    pub state_seq: Vec<FrameState>,
}

/// A queue path driven by a constant arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueTrace {
    pub queue_bits: Vec<f64>,
    pub arrivals: f64,
    pub service: Vec<f64>,
    pub state_seq: Vec<FrameState>,
}

/// Rate in bits/s of one frame's channel.
fn frame_rate(h: &CMatrix, kz_inv: Option<&CMatrix>, weight: f64, mode: CovarianceMode, bandwidth: f64) -> f64 {
    if weight == 0.0 {
        return 0.0;
    }
    let g = match kz_inv {
        Some(k) => h.adjoint() * k * h,
        None => h.adjoint() * h,
    };
    let m = g.nrows();
    let nats = match mode {
        CovarianceMode::Uniform => {
            let a = CMatrix::identity(m, m) + g.map(|z| z * (weight / m as f64));
            match Cholesky::new(a) {
                Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>(),
                None => {
                    let mut l = hermitian_eigenvalues(&g);
                    l.iter_mut().for_each(|v| *v = v.max(0.0));
                    spectral_rate_nats(&l, weight, mode)
                }
            }
        }
        _ => {
            let mut l = hermitian_eigenvalues(&g);
            l.iter_mut().for_each(|v| *v = v.max(0.0));
            spectral_rate_nats(&l, weight, mode)
        }
    };
    bandwidth * nats / LN_2
}

/// Simulates the PU chain, sensing outcomes and per-frame channel draws.
///
/// The PU state of the first frame is drawn from the stationary law
/// (busy with probability `b/(a+b)`) and then evolves by `(a, b)`.
#[allow(clippy::too_many_arguments)]
pub fn service_process(
    config: &SystemConfig,
    sensing: &SensingModel,
    activity: &ActivityModel,
    policy: &PowerPolicy,
    kz: &NoiseCovariance,
    mode: CovarianceMode,
    frames: usize,
    seed: u64,
) -> Result<ServiceTrace> {
    if frames == 0 {
        return Err(Error::invalid("frames", "need at least one frame"));
    }
    if kz.dim() != config.rx_antennas() {
        return Err(Error::DimensionMismatch("K_z size differs from N".into()));
    }
    let (wb, wi) = rate_weights(policy, config);
    let (m, n) = (config.tx_antennas(), config.rx_antennas());
    let t = config.frame_duration();
    let bw = config.bandwidth();
    let mut rng: ChaCha8Rng = sample_rng(seed, 0);
    let mut busy = rng.random::<f64>() < activity.stationary_busy();
    let mut service = Vec::with_capacity(frames);
    let mut state_seq = Vec::with_capacity(frames);
    for frame in 0..frames {
        if frame > 0 {
            let flip = if busy { activity.a() } else { activity.b() };
            if rng.random::<f64>() < flip {
                busy = !busy;
            }
        }
        let detect_busy = rng.random::<f64>() < if busy { sensing.p_d() } else { sensing.p_f() };
        let h = rayleigh_matrix(m, n, &mut rng);
        let state = match (busy, detect_busy) {
            (true, true) => FrameState::BusyDetectedBusy,
            (true, false) => FrameState::BusyDetectedIdle,
            (false, true) => FrameState::IdleDetectedBusy,
            (false, false) => FrameState::IdleDetectedIdle,
        };
        let bits = match state {
            FrameState::BusyDetectedIdle => 0.0,
            s if s.sensed_busy() => t * frame_rate(&h, Some(kz.k_z_inv()), wb, mode, bw),
            _ => t * frame_rate(&h, None, wi, mode, bw),
        };
        service.push(bits);
        state_seq.push(state);
    }
    Ok(ServiceTrace { service, state_seq })
}

/// Lindley recursion `Q[t] = max(0, Q[t−1] + arrival − service[t])` from an empty queue.
pub fn run_queue(trace: &ServiceTrace, arrival_bits_per_frame: f64) -> Result<QueueTrace> {
    if !(arrival_bits_per_frame >= 0.0 && arrival_bits_per_frame.is_finite()) {
        return Err(Error::invalid("arrival", format!("must be non-negative, got {arrival_bits_per_frame}")));
    }
    let mut q = 0.0f64;
    let queue_bits = trace
        .service
        .iter()
        .map(|s| {
            q = (q + arrival_bits_per_frame - s).max(0.0);
            q
        })
        .collect();
    Ok(QueueTrace {
        queue_bits,
        arrivals: arrival_bits_per_frame,
        service: trace.service.clone(),
        state_seq: trace.state_seq.clone(),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    config: &SystemConfig,
    sensing: &SensingModel,
    activity: &ActivityModel,
    policy: &PowerPolicy,
    kz: &NoiseCovariance,
    mode: CovarianceMode,
    arrival_bits_per_frame: f64,
    frames: usize,
    seed: u64,
) -> Result<QueueTrace> {
    let trace = service_process(config, sensing, activity, policy, kz, mode, frames, seed)?;
    run_queue(&trace, arrival_bits_per_frame)
}

/// Fitted tail exponent of the queue-length distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEstimate {
    /// `−slope` of `ln P̂(Q ≥ q)` against `q`, in 1/bits.
    pub theta_hat: f64,
    pub r_squared: f64,
    pub thresholds: Vec<f64>,
    /// Poor fit or too few samples beyond the last threshold.
    pub low_confidence: bool,
}

/// Thresholds at tail probabilities log-spaced from 10⁻¹ to 10⁻³ within the
/// positive part of the sample.
pub fn auto_thresholds(sorted: &[f64]) -> Vec<f64> {
    let n = sorted.len();
    if n == 0 {
        return Vec::new();
    }
    let positive = sorted.iter().filter(|&&q| q > 0.0).count() as f64 / n as f64;
    let high = TAIL_HIGH.min(positive);
    let low = TAIL_LOW.min(high);
    let mut out: Vec<f64> = Vec::with_capacity(AUTO_THRESHOLDS);
    for j in 0..AUTO_THRESHOLDS {
        let frac = j as f64 / (AUTO_THRESHOLDS - 1) as f64;
        let p = high * (low / high).powf(frac);
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        let q = sorted[n - k];
        if q > 0.0 && out.last().is_none_or(|&last| q > last) {
            out.push(q);
        }
    }
    out
}

/// Tail fit on raw queue samples (no warm-up removal).
pub fn decay_from_samples(samples: &[f64], thresholds: Option<&[f64]>) -> Result<DecayEstimate> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let thresholds = match thresholds {
        Some(t) => {
            if t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("thresholds", "must be strictly increasing"));
            }
            t.to_vec()
        }
        None => auto_thresholds(&sorted),
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last_count = 0;
    for &q in &thresholds {
        let count = sorted.len() - sorted.partition_point(|&v| v < q);
        if count > 0 {
            xs.push(q);
            ys.push((count as f64 / n).ln());
            last_count = count;
        }
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "only {} thresholds have a non-empty tail (need 3)",
            xs.len()
        )));
    }
    let (_, slope, r_squared) = linear_fit(&xs, &ys);
    Ok(DecayEstimate {
        theta_hat: (-slope).max(0.0),
        r_squared,
        thresholds: xs,
        low_confidence: r_squared < MIN_R_SQUARED || last_count < MIN_TAIL_COUNT,
    })
}

/// Tail fit after dropping the first [`DEFAULT_WARMUP`] of the frames.
pub fn estimate_decay(trace: &QueueTrace, thresholds: Option<&[f64]>) -> Result<DecayEstimate> {
    let skip = (trace.queue_bits.len() as f64 * DEFAULT_WARMUP) as usize;
    decay_from_samples(&trace.queue_bits[skip..], thresholds)
}
