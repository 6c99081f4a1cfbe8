//! Parameter sweeps producing CSV tables.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{sample_rayleigh, NoiseCovariance};
use crate::config::{db_to_linear, linear_to_db, mu_cap, p2_cap, p2_for_snr, PowerPolicy, Scenario, ScenarioConfig, SensingModel};
use crate::effcap::{
    effective_capacity, effective_rate, effective_rate_estimate, rate_or_ergodic, transition_probs, GridSpec,
    Normalization, SpectralEnsemble,
};
use crate::error::{Error, Result};
use crate::lowsnr::{low_snr_report, uniform_closed_forms};
use crate::queuesim::{estimate_decay, run_queue, service_process};
use crate::rates::CovarianceMode;
use crate::rayleigh::closed_form_effective_rate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Interference budget in dB.
    PInt,
    /// SNR in dB, `μ = 1`, no power caps.
    Snr,
    PD,
    /// Fixed `μ` with `P₂` at its cap.
    Mu,
    Theta,
    /// Idle-sensed power in dB with the largest feasible `μ ≤ 1`.
    P2,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::PInt => "p_int",
            SweepAxis::Snr => "snr",
            SweepAxis::PD => "p_d",
            SweepAxis::Mu => "mu",
            SweepAxis::Theta => "theta",
            SweepAxis::P2 => "p2",
        }
    }

    fn column(&self) -> &'static str {
        match self {
            SweepAxis::PInt => "p_int_db",
            SweepAxis::Snr => "snr_db",
            SweepAxis::PD => "p_d",
            SweepAxis::Mu => "mu",
            SweepAxis::Theta => "theta",
            SweepAxis::P2 => "p2_db",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "p_int" => Self::PInt,
            "snr" => Self::Snr,
            "p_d" => Self::PD,
            "mu" => Self::Mu,
            "theta" => Self::Theta,
            "p2" => Self::P2,
            other => {
                return Err(Error::invalid(
                    "axis",
                    format!("expected one of p_int|snr|p_d|mu|theta|p2, got `{other}`"),
                ))
            }
        })
    }
}

/// Extra output for the `snr` axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Report {
    #[default]
    Rate,
    Ebn0,
}

impl FromStr for Report {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(Self::Rate),
            "ebn0" => Ok(Self::Ebn0),
            other => Err(Error::invalid("report", format!("expected rate|ebn0, got `{other}`"))),
        }
    }
}

/// Monte Carlo settings shared by every table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub samples: usize,
    pub seed: u64,
    pub normalization: Normalization,
    pub mode: CovarianceMode,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 1,
            normalization: Normalization::PerHz,
            mode: CovarianceMode::Uniform,
        }
    }
}

/// A full sweep request.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub config: ScenarioConfig,
    pub settings: RunSettings,
    /// QoS exponents; one row per axis value and θ. Empty means the config's θ.
    pub thetas: Vec<f64>,
    pub report: Report,
    /// Adds closed-form and standard-error columns where available.
    pub cross_validate: bool,
    pub grid: GridSpec,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, config: ScenarioConfig) -> Result<Self> {
        let spec = Self {
            axis,
            values,
            config,
            settings: RunSettings::default(),
            thetas: Vec::new(),
            report: Report::Rate,
            cross_validate: false,
            grid: GridSpec::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("values", "sweep needs at least one value"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "sweep values must be finite"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("values", "sweep values must be strictly increasing"));
        }
        if self.thetas.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::invalid("thetas", "theta values must be non-negative"));
        }
        if self.settings.samples == 0 {
            return Err(Error::invalid("samples", "need at least one sample"));
        }
        self.config.resolve().map(|_| ())
    }
}

/// `from, from+step, …` up to `to` inclusive (within half a step).
pub fn axis_values(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && from.is_finite() && to.is_finite()) || to < from {
        return Err(Error::invalid("step", "need from ≤ to and a positive step"));
    }
    let count = ((to - from) / step + 0.5).floor() as usize + 1;
    Ok((0..count).map(|i| from + i as f64 * step).collect())
}

/// A CSV table with `#` metadata lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(meta: Vec<String>, columns: &[&str]) -> Self {
        Self {
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parsed numeric column; empty or non-numeric cells become NaN.
    pub fn numeric(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        Some(self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for m in &self.meta {
            out.push_str("# ");
            out.push_str(m);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn db2(v: f64) -> String {
    format!("{v:.2}")
}

fn metadata(command: &str, config: &ScenarioConfig, settings: &RunSettings, extra: &[String]) -> Vec<String> {
    let cfg = serde_json::to_string(config).unwrap_or_default();
    let mut meta = vec![
        format!("cogmimo {VERSION}"),
        format!("command: {command}"),
        format!("config: {cfg}"),
        format!(
            "samples={} seed={} normalization={} covariance={}",
            settings.samples, settings.seed, settings.normalization, settings.mode
        ),
    ];
    meta.extend(extra.iter().cloned());
    meta
}

/// Channel ensemble for a scenario (shared by all points of a table).
pub fn build_ensemble(scenario: &Scenario, settings: &RunSettings) -> Result<SpectralEnsemble> {
    let sys = &scenario.system;
    let samples = sample_rayleigh(sys.tx_antennas(), sys.rx_antennas(), settings.samples, settings.seed)?;
    let kz = NoiseCovariance::isotropic(sys.rx_antennas(), sys.interference_var(), sys.noise_var())?;
    SpectralEnsemble::new(&samples, &kz)
}

fn with_sensing_pd(sensing: &SensingModel, p_d: f64) -> Result<SensingModel> {
    SensingModel::new(p_d, sensing.p_f())
}

/// Runs a sweep. Rows come out in axis order, then θ order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let scenario = spec.config.resolve()?;
    let settings = spec.settings;
    let ens = build_ensemble(&scenario, &settings)?;
    let thetas = if spec.thetas.is_empty() || spec.axis == SweepAxis::Theta {
        vec![scenario.system.theta()]
    } else {
        spec.thetas.clone()
    };
    let extra = vec![format!("axis={} report={:?} cross_validate={}", spec.axis, spec.report, spec.cross_validate)];
    let meta = metadata("sweep", &spec.config, &settings, &extra);

    let axis_col = spec.axis.column();
    let mut columns: Vec<&str> = match spec.axis {
        SweepAxis::Theta => vec!["theta", "p_int_db"],
        SweepAxis::PInt => vec!["theta", "p_int_db"],
        _ => vec!["theta", "p_int_db", axis_col],
    };
    match spec.axis {
        SweepAxis::PInt | SweepAxis::Theta | SweepAxis::PD => {
            columns.extend(["mu_star", "p2_star_db", "effective_rate"]);
        }
        SweepAxis::Mu => columns.extend(["p2_db", "effective_rate"]),
        SweepAxis::P2 => columns.extend(["mu", "effective_rate"]),
        SweepAxis::Snr => {
            columns.push("effective_rate");
            if spec.report == Report::Ebn0 {
                columns.push("ebn0_db");
            }
        }
    }
    if spec.cross_validate {
        columns.extend(["closed_form", "mc_stderr"]);
    }
    let mut table = Table::new(meta, &columns);

    let points: Vec<(f64, f64)> = spec
        .values
        .iter()
        .flat_map(|&x| thetas.iter().map(move |&t| (x, t)))
        .collect();
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&(x, theta)| sweep_row(spec, &scenario, &ens, x, theta))
        .collect::<Result<_>>()?;
    table.rows = rows;
    Ok(table)
}

fn sweep_row(spec: &SweepSpec, scenario: &Scenario, ens: &SpectralEnsemble, x: f64, theta: f64) -> Result<Vec<String>> {
    let settings = &spec.settings;
    let (norm, mode) = (settings.normalization, settings.mode);
    let theta = if spec.axis == SweepAxis::Theta { x } else { theta };
    let sys = scenario.system.with_theta(theta)?;
    let mut sensing = scenario.sensing;
    let activity = scenario.activity;
    let p_max = scenario.policy.p_max();
    let mut p_int = scenario.policy.p_int();
    match spec.axis {
        SweepAxis::PInt => p_int = db_to_linear(x),
        SweepAxis::PD => sensing = with_sensing_pd(&sensing, x)?,
        _ => {}
    }
    let tm = transition_probs(&activity, &sensing);
    let mut row = vec![num(theta), num(linear_to_db(p_int))];
    if !matches!(spec.axis, SweepAxis::PInt | SweepAxis::Theta) {
        row.push(num(x));
    }
    // closed form (a+b=1, uniform covariance, θ>0) and MC standard error
    let cross = |policy: &PowerPolicy| -> Result<(String, String)> {
        let cf = if tm.is_memoryless() && theta > 0.0 && mode == CovarianceMode::Uniform {
            num(closed_form_effective_rate(&sys, &tm, policy, norm)?)
        } else {
            String::new()
        };
        let se = if theta > 0.0 {
            num(effective_rate_estimate(ens, policy, &sys, &tm, mode, norm)?.stderr)
        } else {
            String::new()
        };
        Ok((cf, se))
    };
    let policy = match spec.axis {
        SweepAxis::PInt | SweepAxis::Theta | SweepAxis::PD => {
            let r = effective_capacity(ens, &sys, &sensing, &activity, p_max, p_int, spec.grid, mode, norm)?;
            row.extend([num(r.mu_star), num(linear_to_db(r.p2_star)), num(r.value)]);
            Some(PowerPolicy::new(p_max, p_int, r.mu_star, r.p2_star, &sensing)?)
        }
        SweepAxis::Mu => {
            let policy = PowerPolicy::at_cap(p_max, p_int, x, &sensing)?;
            let v = rate_or_ergodic(ens, &policy, &sys, &tm, mode, norm)?;
            row.extend([num(linear_to_db(policy.p2())), num(v)]);
            Some(policy)
        }
        SweepAxis::P2 => {
            let p2 = db_to_linear(x);
            let mu = mu_cap(p2, p_int, sensing.p_d())?.min(1.0);
            match PowerPolicy::new(p_max, p_int, mu, p2, &sensing) {
                Ok(policy) if p2 <= p2_cap(p_max, p_int, sensing.p_d(), mu)? => {
                    let v = rate_or_ergodic(ens, &policy, &sys, &tm, mode, norm)?;
                    row.extend([num(mu), num(v)]);
                    Some(policy)
                }
                _ => {
                    // infeasible power level
                    row.extend([num(mu), String::new()]);
                    None
                }
            }
        }
        SweepAxis::Snr => {
            let snr = db_to_linear(x);
            let policy = PowerPolicy::unconstrained(p2_for_snr(snr, &sys))?;
            let v = rate_or_ergodic(ens, &policy, &sys, &tm, mode, norm)?;
            row.push(num(v));
            if spec.report == Report::Ebn0 {
                row.push(if v > 0.0 { num(linear_to_db(snr / v)) } else { String::new() });
            }
            Some(policy)
        }
    };
    if spec.cross_validate {
        match policy {
            Some(p) => {
                let (cf, se) = cross(&p)?;
                row.extend([cf, se]);
            }
            None => row.extend([String::new(), String::new()]),
        }
    }
    Ok(row)
}

/// One row per `(p_d, θ)` with Monte Carlo and equal-power closed-form columns.
pub fn lowsnr_table(config: &ScenarioConfig, settings: &RunSettings, p_ds: &[f64], thetas: &[f64]) -> Result<Table> {
    let scenario = config.resolve()?;
    let ens = build_ensemble(&scenario, settings)?;
    let p_ds = if p_ds.is_empty() { vec![scenario.sensing.p_d()] } else { p_ds.to_vec() };
    let thetas = if thetas.is_empty() { vec![scenario.system.theta()] } else { thetas.to_vec() };
    let meta = metadata("lowsnr-report", config, settings, &[]);
    let mut table = Table::new(
        meta,
        &[
            "theta", "p_d", "p_f", "a", "b", "ell1", "ell2", "m1", "m2", "c_dot", "c_ddot", "ebn0_min", "ebn0_min_db",
            "s0", "uniform_ebn0_min", "uniform_ebn0_min_db", "uniform_s0", "reason",
        ],
    );
    for &p_d in &p_ds {
        let sensing = with_sensing_pd(&scenario.sensing, p_d)?;
        let tm = transition_probs(&scenario.activity, &sensing);
        for &theta in &thetas {
            let sys = scenario.system.with_theta(theta)?;
            let r = low_snr_report(&ens, &tm, &sys)?;
            let u = uniform_closed_forms(&sys, &tm, sys.interference_var())?;
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            table.rows.push(vec![
                num(theta),
                num(p_d),
                num(sensing.p_f()),
                num(scenario.activity.a()),
                num(scenario.activity.b()),
                num(r.ell1),
                num(r.ell2),
                r.m1.to_string(),
                r.m2.to_string(),
                num(r.c_dot),
                opt(r.c_ddot),
                num(r.ebn0_min),
                db2(r.ebn0_min_db),
                opt(r.s0),
                num(u.ebn0_min),
                db2(u.ebn0_min_db),
                opt(u.s0),
                r.reason.unwrap_or("").to_string(),
            ]);
        }
    }
    Ok(table)
}

/// Queue-tail validation request.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueSpec {
    pub thetas: Vec<f64>,
    pub frames: usize,
    pub seeds: usize,
    /// Fixed arrival in bits/frame instead of `C_E(θ)·TB`.
    pub arrival: Option<f64>,
    pub tolerance: f64,
}

impl Default for QueueSpec {
    fn default() -> Self {
        Self {
            thetas: vec![0.005, 0.01, 0.05],
            frames: 1_000_000,
            seeds: 4,
            arrival: None,
            tolerance: 0.25,
        }
    }
}

/// Arrival `C_E(θ)·TB` (per-Hz normalization) for the scenario's policy.
pub fn arrival_for_theta(scenario: &Scenario, ens: &SpectralEnsemble, theta: f64, mode: CovarianceMode) -> Result<f64> {
    let sys = scenario.system.with_theta(theta)?;
    let tm = transition_probs(&scenario.activity, &scenario.sensing);
    let c = effective_rate(ens, &scenario.policy, &sys, &tm, mode, Normalization::PerHz)?;
    Ok(c * sys.frame_bandwidth())
}

/// One row per `(θ, seed)`; seed `i` uses `settings.seed + i`.
pub fn queue_table(config: &ScenarioConfig, settings: &RunSettings, spec: &QueueSpec) -> Result<Table> {
    if spec.thetas.is_empty() || spec.thetas.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("thetas", "need positive theta values"));
    }
    if spec.frames == 0 || spec.seeds == 0 {
        return Err(Error::invalid("frames", "frames and seeds must be positive"));
    }
    let scenario = config.resolve()?;
    let ens = build_ensemble(&scenario, settings)?;
    let sys = &scenario.system;
    let kz = NoiseCovariance::isotropic(sys.rx_antennas(), sys.interference_var(), sys.noise_var())?;
    let arrivals: Vec<f64> = spec
        .thetas
        .iter()
        .map(|&t| match spec.arrival {
            Some(a) => Ok(a),
            None => arrival_for_theta(&scenario, &ens, t, settings.mode),
        })
        .collect::<Result<_>>()?;
    let extra = vec![format!("frames={} seeds={} tolerance={}", spec.frames, spec.seeds, spec.tolerance)];
    let meta = metadata("queue-validate", config, settings, &extra);
    let mut table = Table::new(
        meta,
        &[
            "theta_target", "arrival_bits_per_frame", "theta_hat", "r_squared", "frames", "seed", "pass", "low_confidence",
        ],
    );
    let seeds: Vec<u64> = (0..spec.seeds as u64).map(|i| settings.seed.wrapping_add(i)).collect();
    let per_seed: Vec<Vec<Vec<String>>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<Vec<String>>> {
            let svc = service_process(
                sys,
                &scenario.sensing,
                &scenario.activity,
                &scenario.policy,
                &kz,
                settings.mode,
                spec.frames,
                seed,
            )?;
            spec.thetas
                .iter()
                .zip(&arrivals)
                .map(|(&theta, &arrival)| {
                    let trace = run_queue(&svc, arrival)?;
                    Ok(match estimate_decay(&trace, None) {
                        Ok(est) => {
                            let pass = (est.theta_hat - theta).abs() <= spec.tolerance * theta;
                            vec![
                                num(theta),
                                num(arrival),
                                num(est.theta_hat),
                                num(est.r_squared),
                                spec.frames.to_string(),
                                seed.to_string(),
                                pass.to_string(),
                                est.low_confidence.to_string(),
                            ]
                        }
                        Err(_) => vec![
                            num(theta),
                            num(arrival),
                            "n/a".into(),
                            "n/a".into(),
                            spec.frames.to_string(),
                            seed.to_string(),
                            "n/a".into(),
                            "true".into(),
                        ],
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    // θ-major order regardless of how the seeds were scheduled
    for ti in 0..spec.thetas.len() {
        for rows in &per_seed {
            table.rows.push(rows[ti].clone());
        }
    }
    Ok(table)
}

/// `μ_cap(P₂)` clamped to `[0, 1]` for each interference budget.
pub fn mu_vs_p2_table(config: &ScenarioConfig, p2_db: &[f64], p_int_db: &[f64]) -> Result<Table> {
    let scenario = config.resolve()?;
    if p2_db.is_empty() {
        return Err(Error::invalid("values", "need at least one P2 value"));
    }
    let p_ints = if p_int_db.is_empty() {
        vec![linear_to_db(scenario.policy.p_int())]
    } else {
        p_int_db.to_vec()
    };
    let meta = metadata("mu-vs-p2", config, &RunSettings::default(), &[]);
    let mut table = Table::new(meta, &["p_int_db", "p2_db", "mu"]);
    for &pi in &p_ints {
        for &p2 in p2_db {
            let mu = mu_cap(db_to_linear(p2), db_to_linear(pi), scenario.sensing.p_d())?.min(1.0);
            table.rows.push(vec![num(pi), num(p2), num(mu)]);
        }
    }
    Ok(table)
}
