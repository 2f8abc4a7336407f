//! Performance analysis of scan-and-wait combining (SWC) over correlated
//! Nakagami-m fading.
//!
//! The analytic path evaluates multiple infinite series over exponentially
//! correlated branches with adaptive truncation; the Monte Carlo path draws
//! correlated Gamma SNRs by Gaussian decomposition and serves as an
//! independent reference. Everything numeric is generic over a [`Real`]
//! scalar (`f32` or `f64`); the `*64` / `*32` aliases fix the precision.

pub mod corr_model;
pub mod error;
pub mod error_prob;
pub mod experiments;
pub mod joint_stats;
pub mod linalg;
pub mod montecarlo;
pub mod scalar;
pub mod series;
pub mod specfun;
pub mod study;
pub mod swc_metrics;
pub mod threshold_solver;

pub use corr_model::{CorrelationKind, CorrelationSpec, GaussianMap};
pub use error::{FdlError, Result};
pub use error_prob::{sec_error_prob, swc_error_prob, ErrorProbReport, ModulationScheme};
pub use joint_stats::{FadingModel, JointStats};
pub use montecarlo::{McConfig, McEstimate};
pub use scalar::Real;
pub use series::{SeriesConfig, SeriesResult, StopRule};
pub use swc_metrics::{MetricsReport, ThresholdProfile};
pub use threshold_solver::SolveResult;

pub type FadingModel64 = FadingModel<f64>;
pub type FadingModel32 = FadingModel<f32>;
pub type CorrelationSpec64 = CorrelationSpec<f64>;
pub type CorrelationSpec32 = CorrelationSpec<f32>;
pub type JointStats64 = JointStats<f64>;
pub type JointStats32 = JointStats<f32>;
pub type SeriesConfig64 = SeriesConfig<f64>;
pub type SeriesConfig32 = SeriesConfig<f32>;
pub type ThresholdProfile64 = ThresholdProfile<f64>;
pub type ThresholdProfile32 = ThresholdProfile<f32>;
