//! Instantaneous transmission rates and the four scenario capacities.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{hermitian_eig, hermitian_eigenvalues, CMatrix, ChannelSample, NoiseCovariance};
use crate::config::{snr_of, PowerPolicy, SystemConfig};
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one are zero modes.
pub const ZERO_MODE_TOL: f64 = 1e-12;
/// Eigenvalues within this fraction of the largest one count as tied with it.
pub const TIE_TOL: f64 = 1e-9;

/// How the trace-one input covariance is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CovarianceMode {
    /// `K_x = I/M`.
    #[default]
    Uniform,
    /// Water-filling over the eigenmodes (capacity achieving).
    Waterfill,
    /// All power on the maximal-eigenvalue eigenspace, split evenly over ties.
    Beamform,
}

impl CovarianceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CovarianceMode::Uniform => "uniform",
            CovarianceMode::Waterfill => "waterfill",
            CovarianceMode::Beamform => "beamform",
        }
    }
}

impl fmt::Display for CovarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CovarianceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "waterfill" => Ok(Self::Waterfill),
            "beamform" => Ok(Self::Beamform),
            other => Err(Error::invalid(
                "covariance_mode",
                format!("expected uniform|waterfill|beamform, got `{other}`"),
            )),
        }
    }
}

/// Normalized (trace-one, PSD) input covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct InputCovariance {
    k_x: CMatrix,
}

impl InputCovariance {
    pub fn new(k_x: CMatrix) -> Result<Self> {
        let eig = hermitian_eig(&k_x)?;
        let min = *eig.values.last().unwrap();
        if min < -1e-12 {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
        let tr: f64 = (0..k_x.nrows()).map(|i| k_x[(i, i)].re).sum();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("k_x", format!("trace must be 1, got {tr}")));
        }
        Ok(Self { k_x })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            k_x: CMatrix::identity(m, m).map(|z| z / m as f64),
        }
    }

    pub fn k_x(&self) -> &CMatrix {
        &self.k_x
    }

    /// `Σ p_i v_i v_i†` over the given columns of `vectors`.
    fn from_modes(vectors: &CMatrix, powers: &[f64]) -> Self {
        let m = vectors.nrows();
        let mut k = CMatrix::zeros(m, m);
        for (j, &p) in powers.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let v = vectors.column(j);
            k += (v * v.adjoint()).map(|z| z * p);
        }
        Self {
            k_x: (&k + k.adjoint()).map(|z| z * 0.5),
        }
    }
}

/// `B·log₂ det[I + weight·H·K_x·H†·(K_z⁻¹ or I)]` in bits/s.
pub fn log_det_rate(
    h: &ChannelSample,
    k_x: &InputCovariance,
    weight: f64,
    kz_inv: Option<&CMatrix>,
    bandwidth: f64,
) -> f64 {
    if weight == 0.0 {
        return 0.0;
    }
    let n = h.rx_antennas();
    let a = h.h() * k_x.k_x() * h.h().adjoint();
    let inner = match kz_inv {
        Some(k) => a * k,
        None => a,
    };
    let m = CMatrix::identity(n, n) + inner.map(|z| z * weight);
    bandwidth * m.determinant().norm().log2()
}

/// Water-filling of `total` power over parallel modes with the given gains.
///
/// Returns `p_i = (ν − 1/g_i)⁺` with `Σ p_i = total`. Zero gains get zero
/// power; if no gain is positive the budget is split evenly.
pub fn waterfill(gains: &[f64], total: f64) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::invalid("gains", "empty gain list"));
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid("total", format!("must be positive, got {total}")));
    }
    if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::invalid("gains", "gains must be finite and non-negative"));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return Ok(vec![total / gains.len() as f64; gains.len()]);
    }
    order.sort_by(|&i, &j| gains[j].total_cmp(&gains[i]));

    // largest active set whose water level clears every member's floor
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (k, &i) in order.iter().enumerate() {
        inv_sum += 1.0 / gains[i];
        let candidate = (total + inv_sum) / (k + 1) as f64;
        if candidate > 1.0 / gains[i] {
            level = candidate;
            active = k + 1;
        } else {
            break;
        }
    }
    let mut p = vec![0.0; gains.len()];
    for &i in &order[..active] {
        p[i] = level - 1.0 / gains[i];
    }
    Ok(p)
}

fn mode_matrix(h: &ChannelSample, kz_inv: Option<&CMatrix>) -> CMatrix {
    match kz_inv {
        Some(k) => h.h().adjoint() * k * h.h(),
        None => h.gram(),
    }
}

fn tied_top(values: &[f64]) -> usize {
    let top = values[0];
    if top <= 0.0 {
        return values.len();
    }
    values.iter().take_while(|&&l| l >= top - TIE_TOL * top).count()
}

/// Covariance maximizing [`log_det_rate`] for the given weight (water-filling
/// on the eigenmodes of `H†K_z⁻¹H`, or `H†H` without `kz_inv`).
pub fn capacity_covariance(h: &ChannelSample, kz_inv: Option<&CMatrix>, weight: f64) -> Result<InputCovariance> {
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(Error::invalid("weight", format!("must be non-negative, got {weight}")));
    }
    if weight == 0.0 {
        return beamform_covariance(h, kz_inv);
    }
    let eig = hermitian_eig(&mode_matrix(h, kz_inv))?;
    let top = eig.values[0].max(0.0);
    let gains: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| if l > ZERO_MODE_TOL * top { weight * l } else { 0.0 })
        .collect();
    let p = waterfill(&gains, 1.0)?;
    Ok(InputCovariance::from_modes(&eig.vectors, &p))
}

/// Beamforming on the maximal-eigenvalue eigenspace, equal weights over ties.
pub fn beamform_covariance(h: &ChannelSample, kz_inv: Option<&CMatrix>) -> Result<InputCovariance> {
    let eig = hermitian_eig(&mode_matrix(h, kz_inv))?;
    let m = tied_top(&eig.values);
    let p: Vec<f64> = (0..eig.values.len())
        .map(|i| if i < m { 1.0 / m as f64 } else { 0.0 })
        .collect();
    Ok(InputCovariance::from_modes(&eig.vectors, &p))
}

pub fn covariance_for_mode(
    h: &ChannelSample,
    kz_inv: Option<&CMatrix>,
    weight: f64,
    mode: CovarianceMode,
) -> Result<InputCovariance> {
    match mode {
        CovarianceMode::Uniform => Ok(InputCovariance::uniform(h.tx_antennas())),
        CovarianceMode::Waterfill => capacity_covariance(h, kz_inv, weight),
        CovarianceMode::Beamform => beamform_covariance(h, kz_inv),
    }
}

/// Rate in nats per channel use for a mode, from the eigenvalues (descending)
/// of `H†K_z⁻¹H` or `H†H`.
pub fn spectral_rate_nats(eigs: &[f64], weight: f64, mode: CovarianceMode) -> f64 {
    if weight == 0.0 || eigs.is_empty() {
        return 0.0;
    }
    let top = eigs[0].max(0.0);
    if top == 0.0 {
        return 0.0;
    }
    match mode {
        CovarianceMode::Uniform => {
            let m = eigs.len() as f64;
            eigs.iter().map(|&l| (weight * l.max(0.0) / m).ln_1p()).sum()
        }
        CovarianceMode::Beamform => {
            let m = tied_top(eigs) as f64;
            m * (weight * top / m).ln_1p()
        }
        CovarianceMode::Waterfill => {
            let gains: Vec<f64> = eigs
                .iter()
                .map(|&l| if l > ZERO_MODE_TOL * top { weight * l } else { 0.0 })
                .collect();
            // gains are validated non-empty and non-negative here
            let p = waterfill(&gains, 1.0).expect("valid gains");
            gains.iter().zip(&p).map(|(g, p)| (g * p).ln_1p()).sum()
        }
    }
}

/// Eigenvalues (descending) of `H†K_z⁻¹H` and `H†H` for one channel sample.
///
/// Every covariance mode's rate is a function of these, which lets ensemble
/// evaluations skip the matrix algebra after a single pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpectrum {
    pub busy: Vec<f64>,
    pub idle: Vec<f64>,
}

impl ChannelSpectrum {
    pub fn new(h: &ChannelSample, kz: &NoiseCovariance) -> Self {
        let clamp = |v: Vec<f64>| v.into_iter().map(|l| l.max(0.0)).collect();
        Self {
            busy: clamp(hermitian_eigenvalues(&h.whitened_gram(kz))),
            idle: clamp(hermitian_eigenvalues(&h.gram())),
        }
    }

    /// Busy-sensed rate `r₁` in bits/s.
    pub fn r1(&self, weight: f64, mode: CovarianceMode, bandwidth: f64) -> f64 {
        bandwidth * spectral_rate_nats(&self.busy, weight, mode) / LN_2
    }

    /// Idle-sensed rate `r₂` in bits/s.
    pub fn r2(&self, weight: f64, mode: CovarianceMode, bandwidth: f64) -> f64 {
        bandwidth * spectral_rate_nats(&self.idle, weight, mode) / LN_2
    }

    pub fn lambda_max_busy(&self) -> f64 {
        self.busy[0]
    }
    pub fn lambda_max_idle(&self) -> f64 {
        self.idle[0]
    }
    /// Multiplicities of the top eigenvalues of `H†K_z⁻¹H` and `H†H`.
    pub fn multiplicities(&self) -> (usize, usize) {
        (tied_top(&self.busy), tied_top(&self.idle))
    }
}

/// Weights `μ·N·snr` (busy-sensed) and `N·snr` (idle-sensed) fed to the log-det rates.
pub fn rate_weights(policy: &PowerPolicy, config: &SystemConfig) -> (f64, f64) {
    let n_snr = config.rx_antennas() as f64 * snr_of(policy.p2(), config);
    (policy.mu() * n_snr, n_snr)
}

/// Rates `r₁`, `r₂` and capacities `C₁..C₄` (bits/s) for one channel sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioRates {
    pub r1: f64,
    pub r2: f64,
    /// `c[0..4]` hold `C₁..C₄`.
    pub c: [f64; 4],
}

/// Scenario rates with each capacity evaluated under the covariance the mode
/// selects for that capacity's own matrix and weight.
pub fn scenario_rates(
    h: &ChannelSample,
    kz: &NoiseCovariance,
    policy: &PowerPolicy,
    config: &SystemConfig,
    mode: CovarianceMode,
) -> Result<ScenarioRates> {
    if h.rx_antennas() != config.rx_antennas() || h.tx_antennas() != config.tx_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}×{}, config expects {}×{}",
            h.rx_antennas(),
            h.tx_antennas(),
            config.rx_antennas(),
            config.tx_antennas()
        )));
    }
    if kz.dim() != config.rx_antennas() {
        return Err(Error::DimensionMismatch("K_z size differs from N".into()));
    }
    let (w_busy, w_idle) = rate_weights(policy, config);
    let b = config.bandwidth();
    let kzi = Some(kz.k_z_inv());
    let cap = |w: f64, k: Option<&CMatrix>| -> Result<f64> {
        let cov = covariance_for_mode(h, k, w, mode)?;
        Ok(log_det_rate(h, &cov, w, k, b))
    };
    let c = [
        cap(w_busy, kzi)?,
        cap(w_idle, kzi)?,
        cap(w_busy, None)?,
        cap(w_idle, None)?,
    ];
    Ok(ScenarioRates {
        r1: c[0],
        r2: c[3],
        c,
    })
}

/// `det(I + c·A·K_z⁻¹)` as a real number (used by the determinant-inequality checks).
pub fn det_identity_plus(a: &CMatrix, c: f64, kz_inv: Option<&CMatrix>) -> f64 {
    let n = a.nrows();
    let inner = match kz_inv {
        Some(k) => a * k,
        None => a.clone(),
    };
    let m: DMatrix<Complex64> = CMatrix::identity(n, n) + inner.map(|z| z * c);
    m.determinant().re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{random_trace_one_psd, rayleigh_matrix, sample_rng};
    use crate::config::SensingModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn scalar(v: f64) -> ChannelSample {
        ChannelSample::new(CMatrix::from_element(1, 1, Complex64::new(v, 0.0))).unwrap()
    }

    #[test]
    fn log_det_scalar_examples() {
        let h = scalar(1.0);
        let k = InputCovariance::uniform(1);
        let half = CMatrix::from_element(1, 1, Complex64::new(0.5, 0.0));
        assert_eq!(log_det_rate(&h, &k, 0.0, Some(&half), 100.0), 0.0);
        assert_relative_eq!(
            log_det_rate(&h, &k, 1.0, Some(&half), 100.0),
            100.0 * 1.5f64.log2(),
            max_relative = 1e-12
        );
        assert_relative_eq!(log_det_rate(&h, &k, 1.0, None, 100.0), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn waterfill_examples() {
        assert_eq!(waterfill(&[5.0], 1.0).unwrap(), vec![1.0]);
        let p = waterfill(&[2.0, 2.0], 1.0).unwrap();
        assert_relative_eq!(p[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(p[1], 0.5, max_relative = 1e-12);
        let p = waterfill(&[2.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(p[0], 0.75, max_relative = 1e-12);
        assert_relative_eq!(p[1], 0.25, max_relative = 1e-12);
        assert!(waterfill(&[], 1.0).is_err());
        let p = waterfill(&[0.0, 3.0], 0.1).unwrap();
        assert_eq!(p[0], 0.0);
        assert_relative_eq!(p[1], 0.1, max_relative = 1e-12);
    }

    #[test]
    fn waterfill_matches_grid_oracle() {
        // brute force over p1 in [0, 1] at step 1e-4
        let objective = |p1: f64| (1.0 + 2.0 * p1).ln() + (1.0 + (1.0 - p1)).ln();
        let best = (0..=10_000)
            .map(|i| i as f64 * 1e-4)
            .max_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .unwrap();
        let p = waterfill(&[2.0, 1.0], 1.0).unwrap();
        assert!((p[0] - best).abs() <= 1e-4);
    }

    proptest! {
        #[test]
        fn waterfill_kkt(gains in proptest::collection::vec(0.0f64..20.0, 1..8), total in 0.01f64..10.0) {
            let p = waterfill(&gains, total).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - total).abs() <= 1e-10 * total.max(1.0));
            if gains.iter().any(|&g| g > 0.0) {
                let active: Vec<usize> = (0..gains.len()).filter(|&i| p[i] > 0.0).collect();
                prop_assert!(!active.is_empty());
                let level = p[active[0]] + 1.0 / gains[active[0]];
                for &i in &active {
                    prop_assert!((p[i] + 1.0 / gains[i] - level).abs() <= 1e-8 * level.max(1.0));
                }
                for i in 0..gains.len() {
                    if p[i] == 0.0 && gains[i] > 0.0 {
                        prop_assert!(1.0 / gains[i] >= level - 1e-8 * level.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn capacity_covariance_beats_random_search() {
        let mut rng = sample_rng(101, 0);
        for trial in 0..1000 {
            let h = ChannelSample::new(rayleigh_matrix(2, 2, &mut rng)).unwrap();
            let kz = crate::channel::build_kz(&random_trace_one_psd(2, &mut rng), 1.0, 1.0).unwrap();
            let kzi = if trial % 2 == 0 { Some(kz.k_z_inv()) } else { None };
            let w = 10f64.powf(rng.random_range(-2.0..2.0));
            let best = capacity_covariance(&h, kzi, w).unwrap();
            let r_best = log_det_rate(&h, &best, w, kzi, 1.0);
            let r_unif = log_det_rate(&h, &InputCovariance::uniform(2), w, kzi, 1.0);
            let rnd = InputCovariance::new(random_trace_one_psd(2, &mut rng)).unwrap();
            let r_rand = log_det_rate(&h, &rnd, w, kzi, 1.0);
            assert!(r_best >= r_unif * (1.0 - 1e-9) - 1e-12, "{r_best} < {r_unif}");
            assert!(r_best >= r_rand * (1.0 - 1e-9) - 1e-12, "{r_best} < {r_rand}");
        }
    }

    #[test]
    fn capacity_covariance_limits() {
        let mut rng = sample_rng(5, 1);
        let h = ChannelSample::new(rayleigh_matrix(3, 3, &mut rng)).unwrap();
        let eig = hermitian_eig(&h.gram()).unwrap();
        // vanishing weight: rank one on the top eigenvector
        let k = capacity_covariance(&h, None, 1e-9).unwrap();
        let top = eig.vectors.column(0);
        let proj = (top.adjoint() * k.k_x() * top)[(0, 0)].re;
        assert!((proj - 1.0).abs() < 1e-9);
        // large weight: allocation approaches uniform
        let k = capacity_covariance(&h, None, 1e9).unwrap();
        for j in 0..3 {
            let v = eig.vectors.column(j);
            let p = (v.adjoint() * k.k_x() * v)[(0, 0)].re;
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn spectral_path_matches_matrix_path() {
        let mut rng = sample_rng(77, 0);
        for trial in 0..200 {
            let (m, n) = (1 + trial % 4, 1 + (trial / 4) % 4);
            let h = ChannelSample::new(rayleigh_matrix(m, n, &mut rng)).unwrap();
            let kz = crate::channel::build_kz(&random_trace_one_psd(n, &mut rng), 1.3, 0.9).unwrap();
            let spec = ChannelSpectrum::new(&h, &kz);
            let w = 10f64.powf(rng.random_range(-3.0..1.5));
            for mode in [CovarianceMode::Uniform, CovarianceMode::Waterfill, CovarianceMode::Beamform] {
                let k1 = covariance_for_mode(&h, Some(kz.k_z_inv()), w, mode).unwrap();
                let k2 = covariance_for_mode(&h, None, w, mode).unwrap();
                let r1 = log_det_rate(&h, &k1, w, Some(kz.k_z_inv()), 100.0);
                let r2 = log_det_rate(&h, &k2, w, None, 100.0);
                assert_relative_eq!(spec.r1(w, mode, 100.0), r1, max_relative = 1e-8, epsilon = 1e-10);
                assert_relative_eq!(spec.r2(w, mode, 100.0), r2, max_relative = 1e-8, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn scenario_examples() {
        let cfg = SystemConfig::default();
        let sensing = SensingModel::default();
        let samples = crate::channel::sample_rayleigh(3, 3, 100, 8).unwrap();
        let no_int = NoiseCovariance::identity(3).unwrap();
        let kz = NoiseCovariance::isotropic(3, 1.0, 1.0).unwrap();
        let full = PowerPolicy::new(10.0, 10.0, 1.0, 10.0, &sensing).unwrap();
        let silent = PowerPolicy::new(10.0, 0.5, 0.0, 6.0, &sensing).unwrap();
        for s in &samples {
            for mode in [CovarianceMode::Uniform, CovarianceMode::Waterfill, CovarianceMode::Beamform] {
                let r = scenario_rates(s, &no_int, &full, &cfg, mode).unwrap();
                assert_relative_eq!(r.r1, r.r2, max_relative = 1e-10);
                assert_relative_eq!(r.c[0], r.c[3], max_relative = 1e-10);
                let r = scenario_rates(s, &kz, &full, &cfg, mode).unwrap();
                assert!(r.r1 <= r.c[2] * (1.0 + 1e-12));
                assert!(r.c[1] <= r.r2 * (1.0 + 1e-12));
                let r = scenario_rates(s, &kz, &silent, &cfg, mode).unwrap();
                assert_eq!(r.r1, 0.0);
            }
        }
    }

    #[test]
    fn determinant_inequality_and_monotonicity() {
        let mut rng = sample_rng(1234, 0);
        for trial in 0..1000 {
            let (m, n) = (1 + trial % 4, 1 + (trial / 4) % 4);
            let h = rayleigh_matrix(m, n, &mut rng);
            let kx = random_trace_one_psd(m, &mut rng);
            let a = &h * kx * h.adjoint();
            let kz = crate::channel::build_kz(&random_trace_one_psd(n, &mut rng), rng.random_range(0.0..4.0), 1.0)
                .unwrap();
            let mut prev = 1.0;
            for c in [0.0, 0.1, 1.0, 10.0] {
                let with = det_identity_plus(&a, c, Some(kz.k_z_inv()));
                let without = det_identity_plus(&a, c, None);
                assert!(with <= without * (1.0 + 1e-10));
                assert!(with >= prev * (1.0 - 1e-12));
                prev = with;
            }
        }
    }

    #[test]
    fn beamforming_wins_at_low_snr() {
        let mut rng = sample_rng(9, 2);
        for _ in 0..500 {
            let h = ChannelSample::new(rayleigh_matrix(3, 2, &mut rng)).unwrap();
            let spec = ChannelSpectrum::new(&h, &NoiseCovariance::isotropic(2, 1.0, 1.0).unwrap());
            for w in [1e-4, 1e-6] {
                assert!(
                    spec.r2(w, CovarianceMode::Beamform, 1.0) >= spec.r2(w, CovarianceMode::Uniform, 1.0)
                );
                assert!(
                    spec.r1(w, CovarianceMode::Beamform, 1.0) >= spec.r1(w, CovarianceMode::Uniform, 1.0)
                );
            }
        }
    }

    #[test]
    fn beamform_splits_ties() {
        let h = ChannelSample::new(CMatrix::identity(2, 2)).unwrap();
        let k = beamform_covariance(&h, None).unwrap();
        assert_relative_eq!(k.k_x()[(0, 0)].re, 0.5, max_relative = 1e-12);
        assert_relative_eq!(k.k_x()[(1, 1)].re, 0.5, max_relative = 1e-12);
        let spec = ChannelSpectrum::new(&h, &NoiseCovariance::identity(2).unwrap());
        assert_eq!(spec.multiplicities(), (2, 2));
    }

    #[test]
    fn mode_parsing() {
        for m in [CovarianceMode::Uniform, CovarianceMode::Waterfill, CovarianceMode::Beamform] {
            assert_eq!(m.as_str().parse::<CovarianceMode>().unwrap(), m);
        }
        assert!("svd".parse::<CovarianceMode>().is_err());
    }
}
