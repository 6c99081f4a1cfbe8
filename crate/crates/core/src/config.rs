//! System parameters and the power / interference constraint algebra.
//!
//! All powers are linear (watts). Conversions to and from dB belong to the
//! presentation layer; see [`db_to_linear`] and [`linear_to_db`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {v}")))
    }
}

fn check_probability(name: &'static str, v: f64) -> Result<()> {
    check_finite(name, v)?;
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in [0, 1], got {v}")))
    }
}

/// Frame, bandwidth, noise, antenna and QoS parameters of the secondary link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    frame_duration: f64,
    bandwidth: f64,
    noise_var: f64,
    interference_var: f64,
    tx_antennas: usize,
    rx_antennas: usize,
    theta: f64,
}

impl SystemConfig {
    pub fn new(
        frame_duration: f64,
        bandwidth: f64,
        noise_var: f64,
        interference_var: f64,
        tx_antennas: usize,
        rx_antennas: usize,
        theta: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("T", frame_duration),
            ("B", bandwidth),
            ("sigma_n2", noise_var),
        ] {
            check_finite(name, v)?;
            if v <= 0.0 {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("sigma_s2", interference_var), ("theta", theta)] {
            check_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        if tx_antennas == 0 {
            return Err(Error::invalid("M", "need at least one transmit antenna"));
        }
        if rx_antennas == 0 {
            return Err(Error::invalid("N", "need at least one receive antenna"));
        }
        Ok(Self {
            frame_duration,
            bandwidth,
            noise_var,
            interference_var,
            tx_antennas,
            rx_antennas,
            theta,
        })
    }

    /// Frame duration `T` in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.frame_duration
    }
    /// Bandwidth `B` in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
    /// Noise variance per receive dimension.
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
    /// Primary-user interference variance per receive dimension.
    pub fn interference_var(&self) -> f64 {
        self.interference_var
    }
    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }
    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }
    /// QoS exponent in 1/bits.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Bits carried by one frame per unit of bits/s/Hz, i.e. `T·B`.
    pub fn frame_bandwidth(&self) -> f64 {
        self.frame_duration * self.bandwidth
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        let mut c = *self;
        c.theta = theta;
        c.revalidate()
    }

    pub fn with_antennas(&self, tx: usize, rx: usize) -> Result<Self> {
        let mut c = *self;
        c.tx_antennas = tx;
        c.rx_antennas = rx;
        c.revalidate()
    }

    pub fn with_interference_var(&self, sigma_s2: f64) -> Result<Self> {
        let mut c = *self;
        c.interference_var = sigma_s2;
        c.revalidate()
    }

    fn revalidate(self) -> Result<Self> {
        Self::new(
            self.frame_duration,
            self.bandwidth,
            self.noise_var,
            self.interference_var,
            self.tx_antennas,
            self.rx_antennas,
            self.theta,
        )
    }
}

impl Default for SystemConfig {
    /// T = 0.1 s, B = 100 Hz, unit noise and interference variances, 3×3, θ = 0.1.
    fn default() -> Self {
        Self {
            frame_duration: 0.1,
            bandwidth: 100.0,
            noise_var: 1.0,
            interference_var: 1.0,
            tx_antennas: 3,
            rx_antennas: 3,
            theta: 0.1,
        }
    }
}

/// Detection and false-alarm probabilities of the spectrum sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingModel {
    p_d: f64,
    p_f: f64,
}

impl SensingModel {
    pub fn new(p_d: f64, p_f: f64) -> Result<Self> {
        check_probability("p_d", p_d)?;
        check_probability("p_f", p_f)?;
        Ok(Self { p_d, p_f })
    }
    pub fn p_d(&self) -> f64 {
        self.p_d
    }
    pub fn p_f(&self) -> f64 {
        self.p_f
    }
}

impl Default for SensingModel {
    fn default() -> Self {
        Self {
            p_d: 0.92,
            p_f: 0.21,
        }
    }
}

/// Two-state Markov model of primary-user activity.
///
/// `a` is the busy→idle transition probability and `b` the idle→busy one, so
/// the stationary probability of a busy channel is `b / (a + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityModel {
    a: f64,
    b: f64,
}

impl ActivityModel {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        check_probability("a", a)?;
        check_probability("b", b)?;
        if a + b <= 0.0 {
            return Err(Error::invalid("a", "a + b must be positive"));
        }
        Ok(Self { a, b })
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn stationary_busy(&self) -> f64 {
        self.b / (self.a + self.b)
    }
    /// True when `a + b = 1` (memoryless activity) to within 1e-12.
    pub fn is_memoryless(&self) -> bool {
        (self.a + self.b - 1.0).abs() <= 1e-12
    }
}

impl Default for ActivityModel {
    fn default() -> Self {
        Self { a: 0.5, b: 0.5 }
    }
}

/// Transmit power policy: `P₁ = μ·P₂` when the channel is sensed busy, `P₂` when sensed idle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPolicy {
    p_max: f64,
    p_int: f64,
    mu: f64,
    p2: f64,
}

impl PowerPolicy {
    /// Builds a policy and checks `p2 ≤ p2_cap(p_max, p_int, p_d, mu)`.
    pub fn new(p_max: f64, p_int: f64, mu: f64, p2: f64, sensing: &SensingModel) -> Result<Self> {
        let cap = p2_cap(p_max, p_int, sensing.p_d(), mu)?;
        check_finite("p2", p2)?;
        if p2 < 0.0 {
            return Err(Error::invalid("p2", format!("must be non-negative, got {p2}")));
        }
        if p2 > cap * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "p2",
                format!("{p2} exceeds the power/interference cap {cap}"),
            ));
        }
        Ok(Self {
            p_max,
            p_int,
            mu,
            p2,
        })
    }

    /// The policy transmitting at the cap for the given `mu`.
    pub fn at_cap(p_max: f64, p_int: f64, mu: f64, sensing: &SensingModel) -> Result<Self> {
        let cap = p2_cap(p_max, p_int, sensing.p_d(), mu)?;
        Self::new(p_max, p_int, mu, cap, sensing)
    }

    /// A policy with `μ = 1` and the given idle-sensed power, with no binding constraints.
    ///
    /// Used by the low-power analysis where the interference budget is
    /// eventually slack.
    pub fn unconstrained(p2: f64) -> Result<Self> {
        check_finite("p2", p2)?;
        if p2 < 0.0 {
            return Err(Error::invalid("p2", format!("must be non-negative, got {p2}")));
        }
        Ok(Self {
            p_max: f64::INFINITY,
            p_int: f64::INFINITY,
            mu: 1.0,
            p2,
        })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }
    pub fn p_int(&self) -> f64 {
        self.p_int
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn p2(&self) -> f64 {
        self.p2
    }
    pub fn p1(&self) -> f64 {
        self.mu * self.p2
    }
}

/// Largest admissible idle-sensed power: `min{p_max, p_int / (p_d·mu + 1 − p_d)}`.
///
/// When `p_d = 1` and `mu = 0` the busy channel is never transmitted into and
/// only the peak constraint remains.
pub fn p2_cap(p_max: f64, p_int: f64, p_d: f64, mu: f64) -> Result<f64> {
    if p_max.is_nan() || p_max < 0.0 {
        return Err(Error::invalid("p_max", format!("must be non-negative, got {p_max}")));
    }
    if p_int.is_nan() || p_int < 0.0 {
        return Err(Error::invalid("p_int", format!("must be non-negative, got {p_int}")));
    }
    check_probability("p_d", p_d)?;
    check_probability("mu", mu)?;
    let exposure = p_d * mu + (1.0 - p_d);
    if exposure <= 0.0 {
        return Ok(p_max);
    }
    Ok(p_max.min(p_int / exposure))
}

/// Largest busy/idle power ratio admissible for a given idle-sensed power.
pub fn mu_cap(p2: f64, p_int: f64, p_d: f64) -> Result<f64> {
    check_finite("p2", p2)?;
    if p2 <= 0.0 {
        return Err(Error::invalid("p2", format!("must be positive, got {p2}")));
    }
    if p_int.is_nan() || p_int < 0.0 {
        return Err(Error::invalid("p_int", format!("must be non-negative, got {p_int}")));
    }
    check_probability("p_d", p_d)?;
    let slack = p_int - p2 * (1.0 - p_d);
    if p_d == 0.0 {
        // mu never enters the constraint
        return Ok(if slack >= 0.0 { 1.0 } else { 0.0 });
    }
    Ok((slack / (p2 * p_d)).clamp(0.0, 1.0))
}

/// Idle-sensed SNR `p2 / (N·B·σ_n²)`; the busy-sensed SNR is `μ` times this.
pub fn snr_of(p2: f64, config: &SystemConfig) -> f64 {
    p2 / (config.rx_antennas() as f64 * config.bandwidth() * config.noise_var())
}

/// Inverse of [`snr_of`].
pub fn p2_for_snr(snr: f64, config: &SystemConfig) -> f64 {
    snr * config.rx_antennas() as f64 * config.bandwidth() * config.noise_var()
}

/// Flat, file-level description of a run. Keys match the field names used in
/// configuration files; every key is optional and falls back to the defaults
/// (T = 0.1 s, B = 100 Hz, σ² = 1, P_d = 0.92, P_f = 0.21, P_max = 10 dB, 3×3, a = b = 0.5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "T")]
    pub frame_duration: f64,
    #[serde(rename = "B")]
    pub bandwidth: f64,
    pub sigma_n2: f64,
    pub sigma_s2: f64,
    #[serde(rename = "M")]
    pub tx_antennas: usize,
    #[serde(rename = "N")]
    pub rx_antennas: usize,
    pub theta: f64,
    pub p_d: f64,
    pub p_f: f64,
    pub a: f64,
    pub b: f64,
    /// Linear watts.
    pub p_max: f64,
    /// Linear watts.
    pub p_int: f64,
    pub mu: f64,
    /// Idle-sensed power in linear watts; `None` means "at the cap".
    pub p2: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sys = SystemConfig::default();
        let sensing = SensingModel::default();
        let activity = ActivityModel::default();
        Self {
            frame_duration: sys.frame_duration,
            bandwidth: sys.bandwidth,
            sigma_n2: sys.noise_var,
            sigma_s2: sys.interference_var,
            tx_antennas: sys.tx_antennas,
            rx_antennas: sys.rx_antennas,
            theta: sys.theta,
            p_d: sensing.p_d,
            p_f: sensing.p_f,
            a: activity.a,
            b: activity.b,
            p_max: 10.0,
            p_int: 1.0,
            mu: 1.0,
            p2: None,
        }
    }
}

/// Validated view of a [`ScenarioConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub system: SystemConfig,
    pub sensing: SensingModel,
    pub activity: ActivityModel,
    pub policy: PowerPolicy,
}

impl ScenarioConfig {
    pub fn resolve(&self) -> Result<Scenario> {
        let system = SystemConfig::new(
            self.frame_duration,
            self.bandwidth,
            self.sigma_n2,
            self.sigma_s2,
            self.tx_antennas,
            self.rx_antennas,
            self.theta,
        )?;
        let sensing = SensingModel::new(self.p_d, self.p_f)?;
        let activity = ActivityModel::new(self.a, self.b)?;
        let policy = match self.p2 {
            Some(p2) => PowerPolicy::new(self.p_max, self.p_int, self.mu, p2, &sensing)?,
            None => PowerPolicy::at_cap(self.p_max, self.p_int, self.mu, &sensing)?,
        };
        Ok(Scenario {
            system,
            sensing,
            activity,
            policy,
        })
    }
}
