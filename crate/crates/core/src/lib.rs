//! Bit-true functional simulator and analytic performance/energy model of a
//! binary-weight CNN convolution accelerator.
//!
//! The crate is organised bottom-up:
//!
//! - [`fxp`]: exact fixed-point arithmetic for the on-chip formats (Q2.9,
//!   Q7.9, Q10.18) with arithmetic-shift truncation and saturation.
//! - [`golden`]: the software reference convolution layer that every
//!   simulated result is checked against, plus the BinaryConnect
//!   binarization functions and tensor/filter fixture files.
//! - [`accel`]: the datapath model (filter bank with circular column shift,
//!   striped SCM image memory, image bank, sum-of-product units, channel
//!   summers, interleaved scale-bias) with a cycle model.
//! - [`metrics`]: operation counts, peak/real throughput and the tiling,
//!   channel-idling and border efficiency factors.
//! - [`power`]: calibrated voltage/frequency operating points, I/O power and
//!   energy per frame.
//! - [`netmodel`]: channel blocking, tiling, oversized-kernel splitting,
//!   off-chip accumulation and whole-network performance reports.
//!
//! Analytic quantities are generic over the float type (`f32`/`f64`); the
//! aliases below fix the common `f64` instantiations.

pub mod accel;
pub mod error;
pub mod fxp;
pub mod golden;
pub mod metrics;
pub mod netmodel;
pub mod power;

pub use error::{Error, Result};

pub use accel::{AccelConfig, CycleReport, SopMode};
pub use fxp::{FxSample, QFormat, RoundMode};
pub use golden::{BinaryFilter, ChannelAffine, FeatureMap, FilterSet, Padding};
pub use metrics::LayerSpec;
pub use netmodel::{BlockPlan, NetworkSpec};

/// Efficiency report in double precision.
pub type EfficiencyReport = metrics::EfficiencyReport<f64>;
/// Efficiency report in single precision.
pub type EfficiencyReportF32 = metrics::EfficiencyReport<f32>;
/// Operating point in double precision.
pub type OperatingPoint = power::OperatingPoint<f64>;
/// Operating point in single precision.
pub type OperatingPointF32 = power::OperatingPoint<f32>;
/// I/O power model in double precision.
pub type IoModel = power::IoModel<f64>;
/// I/O power model in single precision.
pub type IoModelF32 = power::IoModel<f32>;
/// Calibration table in double precision.
pub type Calibration = power::Calibration<f64>;
/// Network performance report in double precision.
pub type PerfReport = netmodel::PerfReport<f64>;
