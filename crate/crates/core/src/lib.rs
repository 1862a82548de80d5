//! Models for a cavity + flux-tunable transmon + mechanical resonator system.
//!
//! All angular frequencies and rates are in rad/s. Configuration files use Hz;
//! see [`units`] for the conversions.

pub mod calibration;
pub mod ceqa;
pub mod device_model;
mod eig;
pub mod error;
pub mod kerr_backaction;
pub mod lm;
pub mod polariton_tls;
pub mod roots;
pub mod semiclassical3;
pub mod timedomain;
pub mod units;

pub use device_model::{DeviceParams, FluxPoint, LindbladConfig, PolaritonSpectrum, TransitionLabel};
pub use error::{Error, Result};
pub use calibration::CalibrationRecord;
pub use kerr_backaction::{DriveSpec, KerrModeConfig, SelfEnergy};
pub use polariton_tls::{ThermalWeights, TlsRates, TransitionTls};
pub use semiclassical3::{Stability, ThreeModeDrive, ThreeModeParams, ThreeModeState};
pub use timedomain::{IntegrationConfig, Model, PsdResult};

pub use num_complex::Complex64;
