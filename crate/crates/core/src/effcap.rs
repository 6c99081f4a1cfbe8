//! Effective capacity of the four-state sensing/activity model.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSample, NoiseCovariance};
use crate::config::{p2_cap, ActivityModel, PowerPolicy, SensingModel, SystemConfig};
use crate::error::{Error, Result};
use crate::rates::{rate_weights, spectral_rate_nats, ChannelSpectrum, CovarianceMode};
use crate::stats::{mean, pairwise_sum};

/// Transition probabilities of the (PU state, sensing decision) chain.
///
/// States are 1 = busy/detected busy, 2 = busy/detected idle,
/// 3 = idle/detected busy, 4 = idle/detected idle. Rows 1–2 of `R` equal
/// `p_b`, rows 3–4 equal `p_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel {
    pub p_b: [f64; 4],
    pub p_i: [f64; 4],
}

pub fn transition_probs(activity: &ActivityModel, sensing: &SensingModel) -> TransitionModel {
    let (a, b) = (activity.a(), activity.b());
    let (pd, pf) = (sensing.p_d(), sensing.p_f());
    TransitionModel {
        p_b: [(1.0 - a) * pd, (1.0 - a) * (1.0 - pd), a * pf, a * (1.0 - pf)],
        p_i: [b * pd, b * (1.0 - pd), (1.0 - b) * pf, (1.0 - b) * (1.0 - pf)],
    }
}

impl TransitionModel {
    pub fn new(activity: &ActivityModel, sensing: &SensingModel) -> Self {
        transition_probs(activity, sensing)
    }

    /// The 4×4 matrix `R`.
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        [self.p_b, self.p_b, self.p_i, self.p_i]
    }

    fn a(&self) -> f64 {
        self.p_b[2] + self.p_b[3]
    }
    fn b(&self) -> f64 {
        self.p_i[0] + self.p_i[1]
    }

    /// Stationary probability of a busy-sensed frame, `(bP_d + aP_f)/(a+b)`.
    pub fn ell1(&self) -> f64 {
        (self.p_i[0] + self.p_b[2]) / (self.a() + self.b())
    }

    /// Stationary probability of an idle, detected-idle frame, `a(1−P_f)/(a+b)`.
    pub fn ell2(&self) -> f64 {
        self.p_b[3] / (self.a() + self.b())
    }

    /// Stationary probability of the OFF state (busy, detected idle).
    pub fn ell_off(&self) -> f64 {
        self.p_i[1] / (self.a() + self.b())
    }

    /// `true` when `a + b = 1` (i.i.d. PU activity; `R` has rank one).
    pub fn is_memoryless(&self) -> bool {
        (self.a() + self.b() - 1.0).abs() <= 1e-12
    }
}

/// Spectral radius of `diag(Θ₁, 1, Θ₁, Θ₂)·R` via the rank-2 closed form.
pub fn spectral_radius_rank2(theta_t1: f64, theta_t2: f64, tm: &TransitionModel) -> f64 {
    let (t1, t2) = (theta_t1, theta_t2);
    let (pb, pi) = (&tm.p_b, &tm.p_i);
    let trace = (pb[0] + pi[2]) * t1 + pi[3] * t2 + pb[1];
    let diff = (pb[0] - pi[2]) * t1 - pi[3] * t2 + pb[1];
    let disc = diff * diff + 4.0 * (pi[0] * t1 + pi[1]) * (pb[2] * t1 + pb[3] * t2);
    0.5 * trace + 0.5 * disc.max(0.0).sqrt()
}

/// Partial derivatives of [`spectral_radius_rank2`] with respect to `(Θ₁, Θ₂)`.
pub fn spectral_radius_gradient(theta_t1: f64, theta_t2: f64, tm: &TransitionModel) -> (f64, f64) {
    let (t1, t2) = (theta_t1, theta_t2);
    let (pb, pi) = (&tm.p_b, &tm.p_i);
    let diff = (pb[0] - pi[2]) * t1 - pi[3] * t2 + pb[1];
    let p = pi[0] * t1 + pi[1];
    let c = pb[2] * t1 + pb[3] * t2;
    let disc = diff * diff + 4.0 * p * c;
    if disc > 1e-24 {
        let root = disc.sqrt();
        let g1 = 0.5 * ((pb[0] + pi[2]) + (diff * (pb[0] - pi[2]) + 2.0 * (pi[0] * c + p * pb[2])) / root);
        let g2 = 0.5 * (pi[3] + (-diff * pi[3] + 2.0 * p * pb[3]) / root);
        (g1, g2)
    } else {
        let h = 1e-7;
        let f = |x: f64, y: f64| spectral_radius_rank2(x, y, tm);
        (
            (f(t1 + h, t2) - f(t1 - h, t2)) / (2.0 * h),
            (f(t1, t2 + h) - f(t1, t2 - h)) / (2.0 * h),
        )
    }
}

/// Whether rates are reported per Hz or per Hz and receive dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    PerHz,
    PerDimension,
}

impl Normalization {
    pub fn divisor(&self, config: &SystemConfig) -> f64 {
        match self {
            Normalization::PerHz => 1.0,
            Normalization::PerDimension => config.rx_antennas() as f64,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::PerHz => "per_hz",
            Normalization::PerDimension => "per_dimension",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_hz" => Ok(Self::PerHz),
            "per_dimension" => Ok(Self::PerDimension),
            other => Err(Error::invalid(
                "normalization",
                format!("expected per_hz|per_dimension, got `{other}`"),
            )),
        }
    }
}

/// Per-sample eigen-spectra of a channel ensemble under a fixed `K_z`.
///
/// Built once and shared across every policy, θ and grid point evaluated on
/// the same draws.
#[derive(Debug, Clone)]
pub struct SpectralEnsemble {
    spectra: Vec<ChannelSpectrum>,
    tx: usize,
    rx: usize,
}

impl SpectralEnsemble {
    pub fn new(samples: &[ChannelSample], kz: &NoiseCovariance) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("samples", "ensemble is empty"))?;
        let (rx, tx) = (first.rx_antennas(), first.tx_antennas());
        if kz.dim() != rx {
            return Err(Error::DimensionMismatch(format!("K_z is {0}×{0} but N = {rx}", kz.dim())));
        }
        if samples.iter().any(|s| s.rx_antennas() != rx || s.tx_antennas() != tx) {
            return Err(Error::DimensionMismatch("ensemble mixes channel shapes".into()));
        }
        let spectra = samples.par_iter().map(|s| ChannelSpectrum::new(s, kz)).collect();
        Ok(Self { spectra, tx, rx })
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn spectra(&self) -> &[ChannelSpectrum] {
        &self.spectra
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx
    }

    fn check(&self, config: &SystemConfig) -> Result<()> {
        if config.rx_antennas() != self.rx || config.tx_antennas() != self.tx {
            return Err(Error::DimensionMismatch(format!(
                "ensemble is {}×{}, config expects {}×{}",
                self.rx,
                self.tx,
                config.rx_antennas(),
                config.tx_antennas()
            )));
        }
        Ok(())
    }

    /// Per-sample rates `(r₁, r₂)` in bits/s.
    pub fn rates(&self, policy: &PowerPolicy, config: &SystemConfig, mode: CovarianceMode) -> (Vec<f64>, Vec<f64>) {
        let (wb, wi) = rate_weights(policy, config);
        let bw = config.bandwidth();
        self.spectra
            .par_iter()
            .map(|s| (s.r1(wb, mode, bw), s.r2(wi, mode, bw)))
            .unzip()
    }

    /// Per-sample `(e^{−θT r₁}, e^{−θT r₂})`.
    fn mgf_terms(&self, wb: f64, wi: f64, mode: CovarianceMode, config: &SystemConfig) -> (Vec<f64>, Vec<f64>) {
        // θ·T·r = θ·T·B·(rate in nats)/ln 2
        let s = config.theta() * config.frame_bandwidth() / LN_2;
        self.spectra
            .par_iter()
            .map(|sp| {
                (
                    (-s * spectral_rate_nats(&sp.busy, wb, mode)).exp(),
                    (-s * spectral_rate_nats(&sp.idle, wi, mode)).exp(),
                )
            })
            .unzip()
    }
}

/// A Monte Carlo estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Effective rate `−ln sp(φ(θ)R)/(θTB·norm)` for a fixed policy.
pub fn effective_rate(
    ens: &SpectralEnsemble,
    policy: &PowerPolicy,
    config: &SystemConfig,
    tm: &TransitionModel,
    mode: CovarianceMode,
    norm: Normalization,
) -> Result<f64> {
    effective_rate_estimate(ens, policy, config, tm, mode, norm).map(|e| e.value)
}

/// [`effective_rate`] together with its Monte Carlo standard error.
pub fn effective_rate_estimate(
    ens: &SpectralEnsemble,
    policy: &PowerPolicy,
    config: &SystemConfig,
    tm: &TransitionModel,
    mode: CovarianceMode,
    norm: Normalization,
) -> Result<RateEstimate> {
    ens.check(config)?;
    if config.theta() <= 0.0 {
        return Err(Error::invalid(
            "theta",
            "effective rate needs theta > 0; use ergodic_capacity for theta = 0",
        ));
    }
    let (wb, wi) = rate_weights(policy, config);
    let (x, y) = ens.mgf_terms(wb, wi, mode, config);
    let (t1, t2) = (mean(&x), mean(&y));
    let sp = spectral_radius_rank2(t1, t2, tm);
    let scale = config.theta() * config.frame_bandwidth() * norm.divisor(config);
    let value = (-sp.ln() / scale).max(0.0);

    let (g1, g2) = spectral_radius_gradient(t1, t2, tm);
    let n = x.len();
    let stderr = if n > 1 {
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| g1 * a + g2 * b).collect();
        let mz = mean(&z);
        let dev: Vec<f64> = z.iter().map(|v| (v - mz) * (v - mz)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        (var / n as f64).sqrt() / (sp * scale)
    } else {
        0.0
    };
    Ok(RateEstimate { value, stderr })
}

/// Ergodic (θ → 0) limit `(ℓ₁E[r₁] + ℓ₂E[r₂])/(B·norm)`.
pub fn ergodic_capacity(
    ens: &SpectralEnsemble,
    policy: &PowerPolicy,
    config: &SystemConfig,
    tm: &TransitionModel,
    mode: CovarianceMode,
    norm: Normalization,
) -> Result<f64> {
    ens.check(config)?;
    let (r1, r2) = ens.rates(policy, config, mode);
    let denom = config.bandwidth() * norm.divisor(config);
    Ok((tm.ell1() * mean(&r1) + tm.ell2() * mean(&r2)) / denom)
}

/// Effective rate, or the ergodic limit when θ = 0.
pub fn rate_or_ergodic(
    ens: &SpectralEnsemble,
    policy: &PowerPolicy,
    config: &SystemConfig,
    tm: &TransitionModel,
    mode: CovarianceMode,
    norm: Normalization,
) -> Result<f64> {
    if config.theta() == 0.0 {
        ergodic_capacity(ens, policy, config, tm, mode, norm)
    } else {
        effective_rate(ens, policy, config, tm, mode, norm)
    }
}

/// Resolution of the `(μ, P₂)` search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub mu_points: usize,
    pub p2_points: usize,
    /// Evaluate every `P₂` point instead of only the per-μ cap.
    ///
    /// The rate is non-decreasing in `P₂`, so the pruned search returns the
    /// same maximizer whenever the maximum is unique.
    pub exhaustive: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            mu_points: 101,
            p2_points: 101,
            exhaustive: false,
        }
    }
}

impl GridSpec {
    pub fn new(mu_points: usize, p2_points: usize) -> Result<Self> {
        if mu_points < 2 || p2_points < 2 {
            return Err(Error::invalid("grid", "need at least 2 points per axis"));
        }
        Ok(Self {
            mu_points,
            p2_points,
            exhaustive: false,
        })
    }

    pub fn exhaustive(mut self) -> Self {
        self.exhaustive = true;
        self
    }
}

/// Optimized effective capacity and its maximizing policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffCapResult {
    pub value: f64,
    pub mu_star: f64,
    pub p2_star: f64,
    pub normalization: Normalization,
}

/// Maximizes the effective rate over `μ ∈ [0, 1]` and `P₂ ∈ [0, p2_cap(μ)]`.
#[allow(clippy::too_many_arguments)]
pub fn effective_capacity(
    ens: &SpectralEnsemble,
    config: &SystemConfig,
    sensing: &SensingModel,
    activity: &ActivityModel,
    p_max: f64,
    p_int: f64,
    grid: GridSpec,
    mode: CovarianceMode,
    norm: Normalization,
) -> Result<EffCapResult> {
    if grid.mu_points < 2 || grid.p2_points < 2 {
        return Err(Error::invalid("grid", "need at least 2 points per axis"));
    }
    let tm = transition_probs(activity, sensing);
    let mut best = EffCapResult {
        value: f64::NEG_INFINITY,
        mu_star: 0.0,
        p2_star: 0.0,
        normalization: norm,
    };
    for i in 0..grid.mu_points {
        let mu = i as f64 / (grid.mu_points - 1) as f64;
        let cap = p2_cap(p_max, p_int, sensing.p_d(), mu)?;
        let first = if grid.exhaustive || cap == 0.0 { 0 } else { grid.p2_points - 1 };
        for j in first..grid.p2_points {
            let p2 = cap * j as f64 / (grid.p2_points - 1) as f64;
            let policy = PowerPolicy::new(p_max, p_int, mu, p2, sensing)?;
            let v = rate_or_ergodic(ens, &policy, config, &tm, mode, norm)?;
            if v > best.value {
                best = EffCapResult {
                    value: v,
                    mu_star: mu,
                    p2_star: p2,
                    normalization: norm,
                };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_rayleigh, CMatrix};
    use approx::assert_relative_eq;
    use nalgebra::Matrix4;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(a: f64, b: f64, pd: f64, pf: f64) -> TransitionModel {
        transition_probs(&ActivityModel::new(a, b).unwrap(), &SensingModel::new(pd, pf).unwrap())
    }

    fn eigen_oracle(t1: f64, t2: f64, tm: &TransitionModel) -> f64 {
        let r = tm.matrix();
        let phi = [t1, 1.0, t1, t2];
        let m = Matrix4::from_fn(|i, j| phi[i] * r[i][j]);
        m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn transition_example() {
        let tm = model(0.1, 0.3, 0.92, 0.21);
        let pb = [0.828, 0.072, 0.021, 0.079];
        let pi = [0.276, 0.024, 0.147, 0.553];
        for k in 0..4 {
            assert_relative_eq!(tm.p_b[k], pb[k], epsilon = 1e-15);
            assert_relative_eq!(tm.p_i[k], pi[k], epsilon = 1e-15);
        }
        let perfect = model(0.3, 0.4, 1.0, 0.0);
        assert_eq!(perfect.p_b[1], 0.0);
        assert_eq!(perfect.p_b[2], 0.0);
        assert_eq!(perfect.p_i[1], 0.0);
        assert_eq!(perfect.p_i[2], 0.0);
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(a in 0.01f64..1.0, b in 0.0f64..1.0, pd in 0.0f64..=1.0, pf in 0.0f64..=1.0) {
            let tm = model(a, b, pd, pf);
            for row in tm.matrix() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
            prop_assert!((tm.ell1() + tm.ell2() + tm.ell_off() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let tm = model(0.1, 0.3, 0.92, 0.21);
        assert_relative_eq!(spectral_radius_rank2(1.0, 1.0, &tm), 1.0, epsilon = 1e-14);
        assert_relative_eq!(spectral_radius_rank2(0.8, 0.6, &tm), 0.7816957059577483, epsilon = 1e-12);
        let iid = model(0.5, 0.5, 0.92, 0.21);
        let collapsed = (0.5 * 0.92 + 0.5 * 0.21) * 0.8 + 0.5 * 0.79 * 0.6 + 0.5 * 0.08;
        assert_relative_eq!(spectral_radius_rank2(0.8, 0.6, &iid), collapsed, epsilon = 1e-14);
    }

    #[test]
    fn spectral_radius_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let tm = model(
                rng.random_range(0.001..1.0),
                rng.random_range(0.0..1.0),
                rng.random(),
                rng.random(),
            );
            let (t1, t2) = (rng.random(), rng.random());
            assert!((spectral_radius_rank2(t1, t2, &tm) - eigen_oracle(t1, t2, &tm)).abs() <= 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let tm = model(rng.random_range(0.01..1.0), rng.random_range(0.01..1.0), rng.random(), rng.random());
            let (t1, t2): (f64, f64) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            let (g1, g2) = spectral_radius_gradient(t1, t2, &tm);
            let h = 1e-6;
            let f = |x, y| spectral_radius_rank2(x, y, &tm);
            assert!((g1 - (f(t1 + h, t2) - f(t1 - h, t2)) / (2.0 * h)).abs() < 1e-6);
            assert!((g2 - (f(t1, t2 + h) - f(t1, t2 - h)) / (2.0 * h)).abs() < 1e-6);
        }
    }

    fn fixture(count: usize) -> (SpectralEnsemble, SystemConfig) {
        let cfg = SystemConfig::default();
        let samples = sample_rayleigh(3, 3, count, 17).unwrap();
        let kz = NoiseCovariance::isotropic(3, 1.0, 1.0).unwrap();
        (SpectralEnsemble::new(&samples, &kz).unwrap(), cfg)
    }

    #[test]
    fn ergodic_limit() {
        let (ens, cfg) = fixture(2000);
        let sensing = SensingModel::default();
        let policy = PowerPolicy::new(10.0, 10.0, 1.0, 5.0, &sensing).unwrap();
        for (a, b) in [(0.5, 0.5), (0.1, 0.3)] {
            let tm = model(a, b, 0.92, 0.21);
            for mode in [CovarianceMode::Uniform, CovarianceMode::Beamform] {
                for norm in [Normalization::PerHz, Normalization::PerDimension] {
                    let erg = ergodic_capacity(&ens, &policy, &cfg, &tm, mode, norm).unwrap();
                    let small = cfg.with_theta(1e-8).unwrap();
                    let eff = effective_rate(&ens, &policy, &small, &tm, mode, norm).unwrap();
                    assert_relative_eq!(eff, erg, max_relative = 1e-3);
                }
            }
        }
        let tm = model(0.5, 0.5, 0.92, 0.21);
        assert_relative_eq!(tm.ell1(), 0.565, epsilon = 1e-15);
    }

    #[test]
    fn effective_rate_properties() {
        let (ens, cfg) = fixture(1000);
        let sensing = SensingModel::default();
        let tm = model(0.5, 0.5, 0.92, 0.21);
        let policy = PowerPolicy::new(10.0, 5.0, 0.5, 3.0, &sensing).unwrap();
        let mut prev = f64::INFINITY;
        for theta in [0.01, 0.1, 1.0] {
            let c = cfg.with_theta(theta).unwrap();
            let v = effective_rate(&ens, &policy, &c, &tm, CovarianceMode::Uniform, Normalization::PerHz).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        assert!(effective_rate(&ens, &policy, &cfg.with_theta(0.0).unwrap(), &tm, CovarianceMode::Uniform, Normalization::PerHz).is_err());

        // identity with the a+b=1 collapse
        let (r1, r2) = ens.rates(&policy, &cfg, CovarianceMode::Waterfill);
        let tt = cfg.theta() * cfg.frame_duration();
        let m1 = mean(&r1.iter().map(|r| (-tt * r).exp()).collect::<Vec<_>>());
        let m2 = mean(&r2.iter().map(|r| (-tt * r).exp()).collect::<Vec<_>>());
        let direct = -(tm.ell1() * m1 + tm.ell2() * m2 + tm.ell_off()).ln() / (cfg.theta() * cfg.frame_bandwidth());
        let v = effective_rate(&ens, &policy, &cfg, &tm, CovarianceMode::Waterfill, Normalization::PerHz).unwrap();
        assert_relative_eq!(v, direct, max_relative = 1e-10);
    }

    #[test]
    fn zero_channel_has_zero_rate() {
        let cfg = SystemConfig::default();
        let samples = vec![ChannelSample::new(CMatrix::zeros(3, 3)).unwrap(); 4];
        let ens = SpectralEnsemble::new(&samples, &NoiseCovariance::identity(3).unwrap()).unwrap();
        let policy = PowerPolicy::unconstrained(10.0).unwrap();
        let tm = model(0.5, 0.5, 0.92, 0.21);
        let v = effective_rate(&ens, &policy, &cfg, &tm, CovarianceMode::Uniform, Normalization::PerHz).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn stderr_matches_replication_spread() {
        let cfg = SystemConfig::default();
        let kz = NoiseCovariance::isotropic(3, 1.0, 1.0).unwrap();
        let tm = model(0.1, 0.3, 0.92, 0.21);
        let policy = PowerPolicy::unconstrained(1.0).unwrap();
        let estimates: Vec<RateEstimate> = (0..20)
            .map(|seed| {
                let ens = SpectralEnsemble::new(&sample_rayleigh(3, 3, 500, 1000 + seed).unwrap(), &kz).unwrap();
                effective_rate_estimate(&ens, &policy, &cfg, &tm, CovarianceMode::Uniform, Normalization::PerHz).unwrap()
            })
            .collect();
        let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
        let spread = crate::stats::mean_var(&values).1.sqrt();
        let predicted = mean(&estimates.iter().map(|e| e.stderr).collect::<Vec<_>>());
        assert!(spread / predicted > 0.5 && spread / predicted < 2.0, "{spread} vs {predicted}");
    }

    #[test]
    fn capacity_search() {
        let (ens, cfg) = fixture(300);
        let sensing = SensingModel::default();
        let activity = ActivityModel::default();
        let grid = GridSpec::new(11, 6).unwrap();
        let mode = CovarianceMode::Uniform;
        let norm = Normalization::PerHz;
        let pruned = effective_capacity(&ens, &cfg, &sensing, &activity, 10.0, 0.3, grid, mode, norm).unwrap();
        let full = effective_capacity(&ens, &cfg, &sensing, &activity, 10.0, 0.3, grid.exhaustive(), mode, norm).unwrap();
        assert_eq!(pruned, full);

        let open = effective_capacity(&ens, &cfg, &sensing, &activity, 10.0, 1e6, grid, mode, norm).unwrap();
        assert_eq!(open.mu_star, 1.0);
        assert_eq!(open.p2_star, 10.0);

        let tiny = effective_capacity(&ens, &cfg, &sensing, &activity, 10.0, 1e-9, grid, mode, norm).unwrap();
        assert!(tiny.value < 1e-6);

        let mut prev = 0.0;
        for p_int in [0.01, 0.1, 1.0, 10.0] {
            let r = effective_capacity(&ens, &cfg, &sensing, &activity, 10.0, p_int, grid, mode, norm).unwrap();
            assert!(r.value >= prev);
            prev = r.value;
        }
        assert!(GridSpec::new(1, 5).is_err());
    }

    #[test]
    fn normalization_parsing() {
        assert_eq!("per_hz".parse::<Normalization>().unwrap(), Normalization::PerHz);
        assert_eq!("per_dimension".parse::<Normalization>().unwrap(), Normalization::PerDimension);
        assert!("per_bit".parse::<Normalization>().is_err());
    }
}
