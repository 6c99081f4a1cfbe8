//! Effective capacity and low-power energy efficiency of cognitive MIMO links
//! operating under imperfect spectrum sensing.

pub mod channel;
pub mod config;
pub mod effcap;
pub mod error;
pub mod lowsnr;
pub mod quadrature;
pub mod queuesim;
pub mod rates;
pub mod rayleigh;
pub mod stats;
pub mod sweep;

pub use channel::{ChannelSample, CMatrix, NoiseCovariance};
pub use config::{ActivityModel, PowerPolicy, Scenario, ScenarioConfig, SensingModel, SystemConfig};
pub use effcap::{EffCapResult, GridSpec, Normalization, RateEstimate, SpectralEnsemble, TransitionModel};
pub use error::{Error, Result};
pub use lowsnr::{LowSnrReport, UniformClosedForms};
pub use queuesim::{DecayEstimate, QueueTrace, ServiceTrace};
pub use rates::{CovarianceMode, InputCovariance};
pub use sweep::{QueueSpec, Report, RunSettings, SweepAxis, SweepSpec, Table};
